//! Analysis strategies compared in the simulations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dgp::{SimulatedStudy, StudyKind};
use crate::did::{
    paired_did_from_differences, two_period_regression_did, DidEstimate, DEFAULT_ALPHA,
};
use crate::error::{Error, Result};
use crate::matching::{
    apply_caliper, logistic_fit, optimal_match, optimal_match_sorted,
    rank_mahalanobis_distances_with, PairAssignment, RankCovariance, DEFAULT_CALIPER_PENALTY,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Unmatched two-way fixed-effects regression on the whole sample.
    None,
    /// Pair matching on the first `ceil(d / 2)` covariates.
    Half,
    /// Pair matching on every covariate.
    Full,
    /// Pair matching on the pre-period outcome.
    Outcome,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::None,
        Strategy::Half,
        Strategy::Full,
        Strategy::Outcome,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Half => "half",
            Strategy::Full => "full",
            Strategy::Outcome => "outcome",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.label() == s)
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "unknown strategy {s:?} (none, half, full, outcome)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub alpha: f64,
    /// Penalty per unit of caliper violation in the first setting.
    pub caliper_penalty: f64,
    pub rank_covariance: RankCovariance,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            caliper_penalty: DEFAULT_CALIPER_PENALTY,
            rank_covariance: RankCovariance::Rescaled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategyResult {
    pub estimate: DidEstimate,
    /// Whether the interval contains the true effect.
    pub covered: bool,
}

/// The 1:1 assignment a matching strategy makes on a study; `None` for the
/// unmatched strategy.
pub fn strategy_assignment(
    study: &SimulatedStudy,
    strategy: Strategy,
    options: &AnalysisOptions,
) -> Result<Option<PairAssignment>> {
    let d = study.covariates.covariates().cols();
    let columns: Vec<usize> = match strategy {
        Strategy::None => return Ok(None),
        Strategy::Outcome => {
            let (t, c) = split(&study.pre_outcomes, &study.treated);
            return optimal_match_sorted(&t, &c, 1, f64::abs).map(Some);
        }
        Strategy::Half => (0..d.div_ceil(2)).collect(),
        Strategy::Full => (0..d).collect(),
    };
    let sample = study.covariates.select_covariates(&columns)?;
    let model = logistic_fit(&sample)?;
    let assignment = match study.kind {
        StudyKind::Sim1 => {
            let dist = rank_mahalanobis_distances_with(&sample, options.rank_covariance)?;
            let dist = apply_caliper(&dist, &model, options.caliper_penalty)?;
            optimal_match(&dist, 1)?
        }
        StudyKind::Sim2 => optimal_match_sorted(
            &model.treated_logits(),
            &model.control_logits(),
            1,
            f64::abs,
        )?,
    };
    Ok(Some(assignment))
}

fn split(values: &[f64], treated: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let mut t = Vec::new();
    let mut c = Vec::new();
    for (&v, &tr) in values.iter().zip(treated) {
        if tr {
            t.push(v);
        } else {
            c.push(v);
        }
    }
    (t, c)
}

/// Estimates the treatment effect on `study` with `strategy`.
pub fn run_strategy(
    study: &SimulatedStudy,
    strategy: Strategy,
    true_effect: f64,
    options: &AnalysisOptions,
) -> Result<StrategyResult> {
    let estimate = match strategy_assignment(study, strategy, options)? {
        None => two_period_regression_did(
            &study.pre_outcomes,
            &study.post_outcomes,
            &study.treated,
            options.alpha,
        )?,
        Some(assignment) => {
            let diffs = pair_differences(study, &assignment)?;
            paired_did_from_differences(&diffs, options.alpha)?
        }
    };
    Ok(StrategyResult {
        estimate,
        covered: estimate.covers(true_effect),
    })
}

/// Treated change minus matched-control change for each pair.
pub fn pair_differences(study: &SimulatedStudy, assignment: &PairAssignment) -> Result<Vec<f64>> {
    let treated = study.covariates.treated_indices();
    let controls = study.covariates.control_indices();
    let change = |i: usize| study.post_outcomes[i] - study.pre_outcomes[i];
    Ok(assignment
        .one_to_one()?
        .into_iter()
        .map(|(t, c)| change(treated[t]) - change(controls[c]))
        .collect())
}
