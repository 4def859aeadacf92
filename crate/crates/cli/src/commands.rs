use std::collections::BTreeMap;
use std::path::PathBuf;

use matchdid::did::{
    paired_did, pairs_from_ids, parallel_trend_test, regression_did, DidEstimate, MatchedPair,
};
use matchdid::matching::{
    apply_caliper, logistic_fit, optimal_match, propensity_distances,
    rank_mahalanobis_distances_with, standardized_differences,
};
use matchdid::simulation::tables::{run_table, TableId};
use serde::Serialize;

use crate::config::{Metric, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{csv_bytes, opt, read_covariates, read_pairs, read_panel, OutputSet};

/// Echo of everything needed to reproduce a run.
#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    inputs: BTreeMap<&'static str, String>,
    config: &'a RunConfig,
    outputs: Vec<String>,
}

fn manifest(
    outputs: &mut OutputSet,
    command: &'static str,
    inputs: BTreeMap<&'static str, String>,
    config: &RunConfig,
) -> CliResult<()> {
    let mut names = outputs.names();
    names.push("manifest.json".into());
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        inputs,
        config,
        outputs: names,
    };
    let mut bytes = serde_json::to_vec_pretty(&m).map_err(|e| CliError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    outputs.add("manifest.json", bytes);
    Ok(())
}

pub struct MatchArgs {
    pub input: PathBuf,
    pub out: PathBuf,
}

pub fn cmd_match(args: &MatchArgs, cfg: &RunConfig) -> CliResult<String> {
    let sample = read_covariates(&args.input)?;
    let model = logistic_fit(&sample)?;
    let dist = match cfg.metric {
        Metric::RankMahalanobis => rank_mahalanobis_distances_with(&sample, cfg.rank_covariance)?,
        Metric::Propensity => propensity_distances(&model, &sample)?,
    };
    let dist = if cfg.caliper {
        apply_caliper(&dist, &model, cfg.caliper_penalty)?
    } else {
        dist
    };
    let assignment = optimal_match(&dist, cfg.k)?;
    let balance = standardized_differences(&sample, Some(&assignment))?;

    let ids = sample.unit_ids();
    let treated = sample.treated_indices();
    let controls = sample.control_indices();
    let pairs = csv_bytes(&["treated_id", "control_id", "distance"], |w| {
        for (t, cs) in &assignment.pairs {
            for &c in cs {
                w.write_record([
                    ids[treated[*t]].as_str(),
                    ids[controls[c]].as_str(),
                    &dist.get(*t, c).to_string(),
                ])?;
            }
        }
        Ok(())
    })?;
    let balance_csv = csv_bytes(
        &[
            "covariate",
            "treated_mean",
            "all_controls_mean",
            "matched_controls_mean",
            "std_diff_before",
            "std_diff_after",
        ],
        |w| {
            for r in &balance.rows {
                w.write_record([
                    r.covariate.clone(),
                    r.treated_mean.to_string(),
                    r.all_controls_mean.to_string(),
                    opt(r.matched_controls_mean),
                    opt(r.std_diff_before),
                    opt(r.std_diff_after),
                ])?;
            }
            Ok(())
        },
    )?;

    let mut outputs = OutputSet::default();
    outputs.add("pairs.csv", pairs);
    outputs.add("balance.csv", balance_csv);
    let inputs = BTreeMap::from([("covariates", args.input.display().to_string())]);
    manifest(&mut outputs, "match", inputs, cfg)?;
    outputs.commit(&args.out)?;

    let mut text = format!(
        "matched {} treated units to {} control(s) each from {} available, total distance {:.4}\n",
        sample.n_treated(),
        cfg.k,
        sample.n_control(),
        assignment.total_distance
    );
    if model.ridge_fallback {
        text.push_str("note: propensity model separated; fitted with a small ridge penalty\n");
    }
    text.push_str(&balance_summary(&balance.rows));
    Ok(text)
}

fn balance_summary(rows: &[matchdid::matching::BalanceRow]) -> String {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
    let mut s = format!("{:<20} {:>10} {:>10}\n", "covariate", "std.diff", "matched");
    for r in rows {
        s.push_str(&format!(
            "{:<20} {:>10} {:>10}\n",
            r.covariate,
            fmt(r.std_diff_before),
            fmt(r.std_diff_after)
        ));
    }
    s
}

pub struct DidArgs {
    pub panel: PathBuf,
    pub pairs: Option<PathBuf>,
    pub pre: Option<String>,
    pub post: Option<String>,
    pub period_order: Option<Vec<String>>,
    pub out: PathBuf,
}

/// Collapses 1:k rows into one record per treated unit by averaging its
/// controls.
fn average_controls(pairs: &[(String, String)], matched: &[MatchedPair]) -> Vec<MatchedPair> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&MatchedPair>> = BTreeMap::new();
    for ((t, _), m) in pairs.iter().zip(matched) {
        if !groups.contains_key(t.as_str()) {
            order.push(t);
        }
        groups.entry(t).or_default().push(m);
    }
    order
        .into_iter()
        .map(|t| {
            let ms = &groups[t];
            let k = ms.len() as f64;
            MatchedPair {
                treated_after: ms[0].treated_after,
                treated_before: ms[0].treated_before,
                control_after: ms.iter().map(|m| m.control_after).sum::<f64>() / k,
                control_before: ms.iter().map(|m| m.control_before).sum::<f64>() / k,
            }
        })
        .collect()
}

pub fn cmd_did(args: &DidArgs, cfg: &RunConfig) -> CliResult<String> {
    let lp = read_panel(&args.panel, args.period_order.as_deref())?;
    let (pre, post) = lp.period_pair(args.pre.as_deref(), args.post.as_deref())?;
    let panel = lp.two_periods(pre, post)?;
    let (estimator, estimate): (&str, DidEstimate) = match &args.pairs {
        Some(path) => {
            let pairs = read_pairs(path)?;
            let matched = pairs_from_ids(&panel, &pairs, 0, 1)?;
            (
                "paired",
                paired_did(&average_controls(&pairs, &matched), cfg.alpha)?,
            )
        }
        None => ("regression", regression_did(&panel, cfg.alpha)?),
    };
    let e = estimate;
    let did_csv = csv_bytes(
        &[
            "estimator",
            "pre",
            "post",
            "point",
            "se",
            "df",
            "ci_low",
            "ci_high",
            "alpha",
            "n",
        ],
        |w| {
            w.write_record([
                estimator.to_string(),
                lp.labels[pre].clone(),
                lp.labels[post].clone(),
                e.point.to_string(),
                e.se.to_string(),
                e.df.to_string(),
                e.ci_low.to_string(),
                e.ci_high.to_string(),
                e.alpha.to_string(),
                e.n.to_string(),
            ])
        },
    )?;
    let mut outputs = OutputSet::default();
    outputs.add("did.csv", did_csv);
    let mut inputs = BTreeMap::from([
        ("panel", args.panel.display().to_string()),
        ("pre", lp.labels[pre].clone()),
        ("post", lp.labels[post].clone()),
        ("period_order", lp.labels.join(",")),
    ]);
    if let Some(p) = &args.pairs {
        inputs.insert("pairs", p.display().to_string());
    }
    manifest(&mut outputs, "did", inputs, cfg)?;
    outputs.commit(&args.out)?;
    Ok(format!(
        "{estimator} DID, {} -> {}: {:.4} ({:.0}% CI {:.4}, {:.4}); se {:.4}, df {}, n {}\n",
        lp.labels[pre],
        lp.labels[post],
        e.point,
        100.0 * (1.0 - e.alpha),
        e.ci_low,
        e.ci_high,
        e.se,
        e.df,
        e.n
    ))
}

pub struct TrendArgs {
    pub panel: PathBuf,
    pub first: Option<String>,
    pub second: Option<String>,
    pub period_order: Option<Vec<String>>,
    pub out: PathBuf,
}

pub fn cmd_trend(args: &TrendArgs, cfg: &RunConfig) -> CliResult<String> {
    let lp = read_panel(&args.panel, args.period_order.as_deref())?;
    let (first, second) = lp.period_pair(args.first.as_deref(), args.second.as_deref())?;
    let r = parallel_trend_test(&lp.two_periods(first, second)?)?;

    let means = lp.panel.cell_means();
    let means_csv = csv_bytes(&["group", "period", "mean", "n"], |w| {
        for m in &means {
            w.write_record([
                u8::from(m.group).to_string(),
                lp.labels[m.period].clone(),
                m.mean.to_string(),
                m.n.to_string(),
            ])?;
        }
        Ok(())
    })?;
    let trend_csv = csv_bytes(
        &["first", "second", "tau_hat", "se", "df", "p_value"],
        |w| {
            w.write_record([
                lp.labels[first].clone(),
                lp.labels[second].clone(),
                r.tau_hat.to_string(),
                r.se.to_string(),
                r.df.to_string(),
                r.p_value.to_string(),
            ])
        },
    )?;
    let mut outputs = OutputSet::default();
    outputs.add("trend.csv", trend_csv);
    outputs.add("trend_means.csv", means_csv);
    let inputs = BTreeMap::from([
        ("panel", args.panel.display().to_string()),
        ("first", lp.labels[first].clone()),
        ("second", lp.labels[second].clone()),
        ("period_order", lp.labels.join(",")),
    ]);
    manifest(&mut outputs, "trend", inputs, cfg)?;
    outputs.commit(&args.out)?;
    Ok(format!(
        "trend difference {} -> {}: tau {:.4}, se {:.4}, df {}, p = {:.4}\n",
        lp.labels[first], lp.labels[second], r.tau_hat, r.se, r.df, r.p_value
    ))
}

pub struct SimulateArgs {
    pub table: TableId,
    pub out: PathBuf,
}

pub fn cmd_simulate(args: &SimulateArgs, cfg: &RunConfig) -> CliResult<String> {
    let rows = run_table(
        args.table,
        &cfg.simulation,
        cfg.reps,
        cfg.seed,
        &cfg.analysis_options(),
    )?;
    let header = [
        "scenario",
        "strategy",
        "mean",
        "sd",
        "median",
        "mad",
        "coverage",
        "mean_ci_length",
    ];
    let table_csv = csv_bytes(&header, |w| {
        for r in &rows {
            let s = &r.summary;
            w.write_record([
                r.scenario.clone(),
                s.strategy.label().to_string(),
                s.mean.to_string(),
                s.sd.to_string(),
                s.median.to_string(),
                s.mad_scaled.to_string(),
                s.coverage.to_string(),
                s.mean_ci_length.to_string(),
            ])?;
        }
        Ok(())
    })?;
    let name = format!("table{}.csv", args.table);
    let mut outputs = OutputSet::default();
    outputs.add(&name, table_csv);
    let inputs = BTreeMap::from([("table", args.table.to_string())]);
    manifest(&mut outputs, "simulate", inputs, cfg)?;
    outputs.commit(&args.out)?;

    let mut text = format!(
        "table {} ({} replications, seed {})\n",
        args.table, cfg.reps, cfg.seed
    );
    text.push_str(&format!(
        "{:<10} {:<8} {:>16} {:>16} {:>16}\n",
        "scenario", "strategy", "mean (sd)", "median (mad)", "coverage (len)"
    ));
    for r in &rows {
        let s = &r.summary;
        text.push_str(&format!(
            "{:<10} {:<8} {:>16} {:>16} {:>16}\n",
            r.scenario,
            s.strategy.label(),
            format!("{:.2} ({:.2})", s.mean, s.sd),
            format!("{:.2} ({:.2})", s.median, s.mad_scaled),
            format!("{:.2} ({:.2})", s.coverage, s.mean_ci_length),
        ));
    }
    Ok(text)
}
