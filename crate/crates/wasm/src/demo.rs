use serde::Serialize;

use matchdid::did::DidEstimate;
use matchdid::matching::{
    apply_caliper, logistic_fit, optimal_match, rank_mahalanobis_distances,
    standardized_differences, BalanceRow, CovariateSample, DEFAULT_CALIPER_PENALTY,
};
use matchdid::simulation::tables::{self, TableBase, TableId, TableRow};
use matchdid::simulation::{generate, run_strategy, AnalysisOptions, Scenario, Strategy};
use matchdid::stats::{mean, RealMatrix, RngStream};

/// Keeps a table run responsive in a single browser thread.
pub const MAX_REPS: usize = 500;

#[derive(Debug, Serialize)]
pub struct GroupMeans {
    pub treated_pre: f64,
    pub treated_post: f64,
    pub control_pre: f64,
    pub control_post: f64,
}

#[derive(Debug, Serialize)]
pub struct StrategyOutcome {
    pub strategy: Strategy,
    pub estimate: Option<DidEstimate>,
    pub covered: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct StudyReport {
    pub true_effect: f64,
    pub n_treated: usize,
    pub n_control: usize,
    pub means: GroupMeans,
    pub strategies: Vec<StrategyOutcome>,
}

fn json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn simulate_study(scenario_json: &str, seed: u64) -> Result<String, String> {
    let scenario: Scenario =
        serde_json::from_str(scenario_json).map_err(|e| format!("scenario: {e}"))?;
    let study = generate(&scenario, RngStream::new(seed, 0)).map_err(|e| e.to_string())?;
    let truth = scenario.true_effect();
    let options = AnalysisOptions::default();

    let pick = |values: &[f64], g: bool| -> Vec<f64> {
        values
            .iter()
            .zip(&study.treated)
            .filter(|(_, t)| **t == g)
            .map(|(v, _)| *v)
            .collect()
    };
    let means = GroupMeans {
        treated_pre: mean(&pick(&study.pre_outcomes, true)),
        treated_post: mean(&pick(&study.post_outcomes, true)),
        control_pre: mean(&pick(&study.pre_outcomes, false)),
        control_post: mean(&pick(&study.post_outcomes, false)),
    };
    let strategies = Strategy::ALL
        .into_iter()
        .map(|s| match run_strategy(&study, s, truth, &options) {
            Ok(r) => StrategyOutcome {
                strategy: s,
                estimate: Some(r.estimate),
                covered: Some(r.covered),
                error: None,
            },
            Err(e) => StrategyOutcome {
                strategy: s,
                estimate: None,
                covered: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let n_treated = study.treated.iter().filter(|t| **t).count();
    json(&StudyReport {
        true_effect: truth,
        n_treated,
        n_control: study.len() - n_treated,
        means,
        strategies,
    })
}

pub fn run_table(table: u8, reps: usize, seed: u64) -> Result<String, String> {
    let id: TableId = table
        .to_string()
        .parse()
        .map_err(|e: matchdid::Error| e.to_string())?;
    if !(2..=MAX_REPS).contains(&reps) {
        return Err(format!("reps must be between 2 and {MAX_REPS}"));
    }
    let rows: Vec<TableRow> = tables::run_table(
        id,
        &TableBase::default(),
        reps,
        seed,
        &AnalysisOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    json(&rows)
}

#[derive(Debug, Serialize)]
pub struct MatchedPairRow {
    pub treated_id: String,
    pub control_id: String,
    pub distance: f64,
}

#[derive(Debug, Serialize)]
pub struct MatchReport {
    pub total_distance: f64,
    pub pairs: Vec<MatchedPairRow>,
    pub balance: Vec<BalanceRow>,
}

fn parse_covariates(csv_text: &str) -> Result<CovariateSample, String> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.len() < 3 || &header[0] != "unit_id" || &header[1] != "treated" {
        return Err("header must be unit_id,treated,<covariate...>".into());
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let (mut ids, mut treated, mut data) = (Vec::new(), Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| format!("line {line}: {e}"))?;
        ids.push(record[0].to_string());
        treated.push(match &record[1] {
            "1" => true,
            "0" => false,
            other => {
                return Err(format!(
                    "line {line}: treated must be 0 or 1, got {other:?}"
                ))
            }
        });
        for (j, name) in names.iter().enumerate() {
            let v: f64 = record[j + 2].parse().map_err(|_| {
                format!("line {line}: {name} is not a number: {:?}", &record[j + 2])
            })?;
            data.push(v);
        }
    }
    let covariates = RealMatrix::new(ids.len(), names.len(), data).map_err(|e| e.to_string())?;
    CovariateSample::new(ids, treated, covariates, names).map_err(|e| e.to_string())
}

pub fn match_covariates(csv_text: &str, k: usize, caliper: bool) -> Result<String, String> {
    let sample = parse_covariates(csv_text)?;
    let run = || -> matchdid::Result<MatchReport> {
        let mut dist = rank_mahalanobis_distances(&sample)?;
        if caliper {
            dist = apply_caliper(&dist, &logistic_fit(&sample)?, DEFAULT_CALIPER_PENALTY)?;
        }
        let assignment = optimal_match(&dist, k)?;
        let ids = sample.unit_ids();
        let (treated, controls) = (sample.treated_indices(), sample.control_indices());
        let pairs = assignment
            .pairs
            .iter()
            .flat_map(|(t, cs)| {
                cs.iter().map(|&c| MatchedPairRow {
                    treated_id: ids[treated[*t]].clone(),
                    control_id: ids[controls[c]].clone(),
                    distance: dist.get(*t, c),
                })
            })
            .collect();
        Ok(MatchReport {
            total_distance: assignment.total_distance,
            pairs,
            balance: standardized_differences(&sample, Some(&assignment))?.rows,
        })
    };
    json(&run().map_err(|e| e.to_string())?)
}
