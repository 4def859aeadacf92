//! Covariate balance before and after matching.

use serde::Serialize;

use super::assignment::PairAssignment;
use super::sample::CovariateSample;
use crate::error::{Error, Result};
use crate::stats::{mean, sample_variance};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceRow {
    pub covariate: String,
    pub treated_mean: f64,
    pub all_controls_mean: f64,
    pub matched_controls_mean: Option<f64>,
    /// `None` when the pooled before-matching SD is zero or undefined.
    pub std_diff_before: Option<f64>,
    pub std_diff_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceTable {
    pub rows: Vec<BalanceRow>,
}

/// Standardized mean differences.
///
/// Both the before and after differences are divided by the same
/// before-matching pooled SD, `sqrt((var_treated + var_all_controls) / 2)`,
/// so the two columns are directly comparable.
pub fn standardized_differences(
    sample: &CovariateSample,
    assignment: Option<&PairAssignment>,
) -> Result<BalanceTable> {
    let treated = sample.treated_indices();
    let controls = sample.control_indices();
    let matched: Option<Vec<usize>> = match assignment {
        None => None,
        Some(a) => {
            let mut rows = Vec::new();
            for (t, cs) in &a.pairs {
                if *t >= treated.len() {
                    return Err(Error::Invalid(format!("treated index {t} out of range")));
                }
                for &c in cs {
                    let row = *controls
                        .get(c)
                        .ok_or_else(|| Error::Invalid(format!("control index {c} out of range")))?;
                    rows.push(row);
                }
            }
            if rows.is_empty() {
                return Err(Error::Invalid("assignment has no matched controls".into()));
            }
            Some(rows)
        }
    };

    let x = sample.covariates();
    let rows = (0..x.cols())
        .map(|j| {
            let col = x.column(j);
            let pick = |idx: &[usize]| idx.iter().map(|&i| col[i]).collect::<Vec<_>>();
            let xt = pick(&treated);
            let xc = pick(&controls);
            let treated_mean = mean(&xt);
            let all_controls_mean = mean(&xc);
            let pooled = ((sample_variance(&xt) + sample_variance(&xc)) / 2.0).sqrt();
            let standardize =
                |diff: f64| (pooled.is_finite() && pooled > 0.0).then(|| diff / pooled);
            let matched_controls_mean = matched.as_ref().map(|m| mean(&pick(m)));
            BalanceRow {
                covariate: sample.covariate_names()[j].clone(),
                treated_mean,
                all_controls_mean,
                matched_controls_mean,
                std_diff_before: standardize(treated_mean - all_controls_mean),
                std_diff_after: matched_controls_mean.and_then(|m| standardize(treated_mean - m)),
            }
        })
        .collect();
    Ok(BalanceTable { rows })
}
