use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn matchdid(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matchdid"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

const COVARIATES: &str = "\
unit_id,treated,income,poverty
t1,1,30,18
t2,1,41,12
c1,0,29,19
c2,0,55,8
c3,0,40,15
c4,0,33,11
";

/// Four-cell panel whose group means reproduce the all-cause table:
/// treated 1141 -> 1134, controls 1022 -> 921.
const TABLE_PANEL: &str = "\
unit_id,group,period,outcome
m1,1,1979-1989,1131
m1,1,1999-2016,1124
m2,1,1979-1989,1151
m2,1,1999-2016,1144
k1,0,1979-1989,1012
k1,0,1999-2016,921
k2,0,1979-1989,1032
k2,0,1999-2016,921
";

fn did_row(dir: &Path) -> Vec<String> {
    let text = read(dir, "did.csv");
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "estimator,pre,post,point,se,df,ci_low,ci_high,alpha,n"
    );
    lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect()
}

#[test]
fn match_toy_file_writes_pairs_and_balance() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "cov.csv", COVARIATES);
    let out = matchdid(dir.path(), &["match", "cov.csv", "--out", "run"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = dir.path().join("run");
    let pairs = read(&run, "pairs.csv");
    let rows: Vec<&str> = pairs.lines().collect();
    assert_eq!(rows[0], "treated_id,control_id,distance");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("t1,c1,"), "{pairs}");
    assert!(
        rows[2].starts_with("t2,") && !rows[2].starts_with("t2,c1,"),
        "{pairs}"
    );
    let balance = read(&run, "balance.csv");
    assert_eq!(balance.lines().count(), 3);
    assert!(balance.lines().nth(1).unwrap().starts_with("income,"));
    let manifest: serde_json::Value = serde_json::from_str(&read(&run, "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "match");
    assert_eq!(manifest["config"]["k"], 1);
}

#[test]
fn one_to_two_uses_four_distinct_controls() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "cov.csv", COVARIATES);
    let out = matchdid(
        dir.path(),
        &[
            "match",
            "cov.csv",
            "--k",
            "2",
            "--metric",
            "propensity",
            "--no-caliper",
            "--out",
            "run",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let pairs = read(&dir.path().join("run"), "pairs.csv");
    let mut controls: Vec<&str> = pairs
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(controls.len(), 4);
    controls.sort();
    controls.dedup();
    assert_eq!(controls.len(), 4);
}

#[test]
fn infeasible_k_exits_3_without_output() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "cov.csv", COVARIATES);
    let out = matchdid(
        dir.path(),
        &["match", "cov.csv", "--k", "3", "--out", "run"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn malformed_header_exits_2_without_partial_output() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "cov.csv", "id,treated,x\na,1,2\nb,0,3\n");
    let out = matchdid(dir.path(), &["match", "cov.csv", "--out", "run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn bad_value_reports_line_number() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "cov.csv",
        "unit_id,treated,x\na,1,2\nb,0,oops\nc,0,1\n",
    );
    let out = matchdid(dir.path(), &["match", "cov.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    let out = matchdid(dir.path(), &["match", "cov.csv", "--k", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn did_reproduces_all_controls_estimate() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "panel.csv", TABLE_PANEL);
    let out = matchdid(dir.path(), &["did", "panel.csv", "--out", "run"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let row = did_row(&dir.path().join("run"));
    assert_eq!(row[0], "regression");
    let point: f64 = row[3].parse().unwrap();
    assert!((point - 94.0).abs() < 1e-9, "{point}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("94.0000"));
}

#[test]
fn did_with_identical_pairs_is_zero() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "panel.csv",
        "unit_id,group,period,outcome\nt,1,a,1\nt,1,b,4\nu,1,a,2\nu,1,b,2\nc,0,a,5\nc,0,b,8\nd,0,a,0\nd,0,b,0\n",
    );
    write(dir.path(), "pairs.csv", "treated_id,control_id\nt,c\nu,d\n");
    let out = matchdid(
        dir.path(),
        &["did", "panel.csv", "--pairs", "pairs.csv", "--out", "run"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let row = did_row(&dir.path().join("run"));
    assert_eq!(row[0], "paired");
    assert_eq!(row[3].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn did_input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "panel.csv", TABLE_PANEL);
    let out = matchdid(
        dir.path(),
        &["did", "panel.csv", "--pre", "1979-1989", "--post", "2020"],
    );
    assert_eq!(out.status.code(), Some(2));
    write(
        dir.path(),
        "pairs.csv",
        "treated_id,control_id\nm1,k1\nm2,ghost\n",
    );
    let out = matchdid(
        dir.path(),
        &["did", "panel.csv", "--pairs", "pairs.csv", "--out", "run"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ghost"));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn did_with_three_periods_needs_explicit_choice() {
    let dir = TempDir::new().unwrap();
    let mut panel = TABLE_PANEL.to_string();
    for (u, g) in [("m1", 1), ("m2", 1), ("k1", 0), ("k2", 0)] {
        panel.push_str(&format!("{u},{g},1990-1998,1000\n"));
    }
    write(dir.path(), "panel.csv", &panel);
    let out = matchdid(dir.path(), &["did", "panel.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = matchdid(
        dir.path(),
        &[
            "did",
            "panel.csv",
            "--period-order",
            "1979-1989,1990-1998,1999-2016",
            "--pre",
            "1979-1989",
            "--post",
            "1999-2016",
            "--out",
            "run",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let row = did_row(&dir.path().join("run"));
    assert!((row[3].parse::<f64>().unwrap() - 94.0).abs() < 1e-9);
}

#[test]
fn trend_identical_and_divergent() {
    let dir = TempDir::new().unwrap();
    let mut same = String::from("unit_id,group,period,outcome\n");
    let mut diverge = same.clone();
    for i in 0..6 {
        let b = i as f64;
        for (u, g) in [(format!("t{i}"), 1), (format!("c{i}"), 0)] {
            same.push_str(&format!("{u},{g},p1,{b}\n{u},{g},p2,{}\n", b + 2.0));
            let slope = if g == 1 { 20.0 } else { 2.0 };
            diverge.push_str(&format!(
                "{u},{g},p1,{b}\n{u},{g},p2,{}\n",
                b + slope + 0.1 * b * b
            ));
        }
    }
    write(dir.path(), "same.csv", &same);
    write(dir.path(), "diverge.csv", &diverge);

    let out = matchdid(dir.path(), &["trend", "same.csv", "--out", "a"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trend = read(&dir.path().join("a"), "trend.csv");
    let p: f64 = trend
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(5)
        .unwrap()
        .parse()
        .unwrap();
    assert!(p > 0.999, "{p}");
    assert_eq!(
        read(&dir.path().join("a"), "trend_means.csv")
            .lines()
            .count(),
        1 + 2 * 2
    );

    let out = matchdid(
        dir.path(),
        &[
            "trend",
            "diverge.csv",
            "--first",
            "p1",
            "--second",
            "p2",
            "--out",
            "b",
        ],
    );
    assert!(out.status.success());
    let trend = read(&dir.path().join("b"), "trend.csv");
    let p: f64 = trend
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(5)
        .unwrap()
        .parse()
        .unwrap();
    assert!(p < 0.001, "{p}");
}

#[test]
fn trend_missing_cell_exits_2() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "panel.csv",
        "unit_id,group,period,outcome\nt,1,p1,1\nc,0,p1,2\nc,0,p2,3\nd,0,p1,2\nd,0,p2,3\n",
    );
    let out = matchdid(dir.path(), &["trend", "panel.csv", "--out", "run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn simulate_smoke_shape_and_config_precedence() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "cfg.json", r#"{"reps": 7, "seed": 11}"#);
    let out = matchdid(
        dir.path(),
        &[
            "simulate", "--table", "4", "--config", "cfg.json", "--reps", "50", "--out", "run",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = dir.path().join("run");
    let table = read(&run, "table4.csv");
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(
        lines[0],
        "scenario,strategy,mean,sd,median,mad,coverage,mean_ci_length"
    );
    assert_eq!(lines.len(), 1 + 9);
    assert!(lines[1].starts_with("d=2,none,"));
    let manifest: serde_json::Value = serde_json::from_str(&read(&run, "manifest.json")).unwrap();
    assert_eq!(manifest["config"]["reps"], 50);
    assert_eq!(manifest["config"]["seed"], 11);
}

#[test]
fn simulate_rerun_from_manifest_is_identical() {
    let dir = TempDir::new().unwrap();
    let out = matchdid(
        dir.path(),
        &[
            "simulate", "--table", "6", "--reps", "20", "--seed", "3", "--out", "a",
        ],
    );
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("a"), "manifest.json")).unwrap();
    write(dir.path(), "resolved.json", &manifest["config"].to_string());
    let out = matchdid(
        dir.path(),
        &[
            "simulate",
            "--table",
            "6",
            "--config",
            "resolved.json",
            "--out",
            "b",
        ],
    );
    assert!(out.status.success());
    assert_eq!(
        read(&dir.path().join("a"), "table6.csv"),
        read(&dir.path().join("b"), "table6.csv")
    );
    assert_eq!(
        read(&dir.path().join("a"), "manifest.json"),
        read(&dir.path().join("b"), "manifest.json")
    );
}

#[test]
fn invalid_scenario_exits_2() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "cfg.json",
        r#"{"simulation": {"sim1": {"n_control": 3}}}"#,
    );
    let out = matchdid(
        dir.path(),
        &[
            "simulate", "--table", "4", "--config", "cfg.json", "--reps", "5",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = matchdid(dir.path(), &["simulate", "--table", "9"]);
    assert_eq!(out.status.code(), Some(2));
    write(dir.path(), "bad.json", r#"{"sed": 1}"#);
    let out = matchdid(
        dir.path(),
        &["simulate", "--table", "4", "--config", "bad.json"],
    );
    assert_eq!(out.status.code(), Some(2));
}
