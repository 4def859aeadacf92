//! Treated-by-control distance matrices.

use serde::Serialize;

use super::logistic::PropensityModel;
use super::sample::CovariateSample;
use crate::error::{Error, Result};
use crate::stats::linalg::forward_substitute;
use crate::stats::{cholesky_lower, rank_transform, RealMatrix};

/// Penalty per unit of caliper violation used by the matching workflow.
pub const DEFAULT_CALIPER_PENALTY: f64 = 1000.0;

/// Nonnegative finite distances; row `i` is the `i`-th treated unit and column
/// `j` the `j`-th control unit, both in sample order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceMatrix {
    matrix: RealMatrix,
}

impl DistanceMatrix {
    pub fn new(matrix: RealMatrix) -> Result<Self> {
        if let Some(v) = matrix.as_slice().iter().find(|v| **v < 0.0) {
            return Err(Error::Domain(format!("negative distance {v}")));
        }
        Ok(Self { matrix })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(RealMatrix::from_rows(rows)?)
    }

    pub fn n_treated(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_control(&self) -> usize {
        self.matrix.cols()
    }

    #[inline]
    pub fn get(&self, treated: usize, control: usize) -> f64 {
        self.matrix[(treated, control)]
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.matrix
    }
}

/// How the covariance of the ranked covariates is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankCovariance {
    /// Diagonal set to the variance of untied ranks, `(n^2 - 1) / 12`, keeping
    /// the correlations. Ties then do not inflate a covariate's weight.
    #[default]
    Rescaled,
    /// Plain sample covariance of the ranks.
    Plain,
}

/// Rank-based Mahalanobis distance between every treated and control unit.
pub fn rank_mahalanobis_distances(sample: &CovariateSample) -> Result<DistanceMatrix> {
    rank_mahalanobis_distances_with(sample, RankCovariance::Rescaled)
}

pub fn rank_mahalanobis_distances_with(
    sample: &CovariateSample,
    covariance: RankCovariance,
) -> Result<DistanceMatrix> {
    let n = sample.len();
    let d = sample.covariates().cols();
    let ranks = rank_transform(sample.covariates());
    let mut cov = ranks.covariance()?;
    let singular = |column: usize| Error::Singular {
        column,
        name: sample.covariate_names()[column].clone(),
    };

    if covariance == RankCovariance::Rescaled {
        let untied = ((n * n) as f64 - 1.0) / 12.0;
        let mut ratio = vec![0.0; d];
        for j in 0..d {
            if !(cov[(j, j)] > 0.0) {
                return Err(singular(j));
            }
            ratio[j] = (untied / cov[(j, j)]).sqrt();
        }
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] *= ratio[a] * ratio[b];
            }
        }
    }
    let scale = (0..d).map(|j| cov[(j, j)]).fold(0.0, f64::max);
    let l = cholesky_lower(&cov).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot, .. } => singular(pivot),
        other => other,
    })?;
    // near-collinear columns pass Cholesky with a tiny pivot
    if let Some(j) = (0..d).find(|&j| l[(j, j)] * l[(j, j)] <= 1e-10 * scale) {
        return Err(singular(j));
    }

    // Whitened ranks: distance is the Euclidean distance between them.
    let whiten = |i: usize| {
        let mut w = ranks.row(i).to_vec();
        forward_substitute(&l, &mut w);
        w
    };
    let treated: Vec<Vec<f64>> = sample.treated_indices().into_iter().map(whiten).collect();
    let control: Vec<Vec<f64>> = sample.control_indices().into_iter().map(whiten).collect();
    let mut data = Vec::with_capacity(treated.len() * control.len());
    for t in &treated {
        for c in &control {
            let ss: f64 = t.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            data.push(ss.sqrt());
        }
    }
    DistanceMatrix::new(RealMatrix::new(treated.len(), control.len(), data)?)
}

/// `|logit_i - logit_j|` for every treated/control pair.
pub fn propensity_distances(
    model: &PropensityModel,
    sample: &CovariateSample,
) -> Result<DistanceMatrix> {
    if model.treated_mask() != sample.treated() {
        return Err(Error::Invalid(
            "propensity model was fitted on a different sample".into(),
        ));
    }
    absolute_differences(&model.treated_logits(), &model.control_logits())
}

/// `|y_i0 - y_j0|` on pre-period outcomes.
pub fn outcome_distances(pre_treated: &[f64], pre_control: &[f64]) -> Result<DistanceMatrix> {
    absolute_differences(pre_treated, pre_control)
}

fn absolute_differences(treated: &[f64], control: &[f64]) -> Result<DistanceMatrix> {
    if treated.is_empty() || control.is_empty() {
        return Err(Error::Domain(
            "distance matrix needs treated and control values".into(),
        ));
    }
    let data = treated
        .iter()
        .flat_map(|t| control.iter().map(move |c| (t - c).abs()))
        .collect();
    DistanceMatrix::new(RealMatrix::new(treated.len(), control.len(), data)?)
}

/// Soft caliper on the logit propensity score: every pair whose logit gap
/// exceeds the caliper width is charged `penalty_scale` per unit of excess.
pub fn apply_caliper(
    dist: &DistanceMatrix,
    model: &PropensityModel,
    penalty_scale: f64,
) -> Result<DistanceMatrix> {
    if !(penalty_scale.is_finite() && penalty_scale > 0.0) {
        return Err(Error::Domain(format!(
            "caliper penalty must be positive, got {penalty_scale}"
        )));
    }
    let lt = model.treated_logits();
    let lc = model.control_logits();
    if lt.len() != dist.n_treated() || lc.len() != dist.n_control() {
        return Err(Error::Shape(format!(
            "distance matrix is {}x{} but the propensity model has {} treated and {} controls",
            dist.n_treated(),
            dist.n_control(),
            lt.len(),
            lc.len()
        )));
    }
    let mut m = dist.matrix().clone();
    for (i, a) in lt.iter().enumerate() {
        for (j, b) in lc.iter().enumerate() {
            let excess = (a - b).abs() - model.caliper_width;
            if excess > 0.0 {
                m[(i, j)] += penalty_scale * excess;
            }
        }
    }
    DistanceMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::logistic_fit;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_covariate_reduces_to_scaled_rank_gap() {
        let x = [0.3, 2.0, -1.0, 5.0, 4.0];
        let t = vec![true, false, true, false, false];
        let s =
            CovariateSample::from_matrix(t, RealMatrix::new(5, 1, x.to_vec()).unwrap()).unwrap();
        let dm = rank_mahalanobis_distances(&s).unwrap();
        let ranks: [f64; 5] = [2.0, 3.0, 1.0, 5.0, 4.0];
        let sd = ((25.0 - 1.0) / 12.0f64).sqrt();
        for (i, &ti) in [0usize, 2].iter().enumerate() {
            for (j, &cj) in [1usize, 3, 4].iter().enumerate() {
                assert_abs_diff_eq!(
                    dm.get(i, j),
                    (ranks[ti] - ranks[cj]).abs() / sd,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn constant_column_is_singular() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 1.0]).collect();
        let s = CovariateSample::from_matrix(
            vec![true, false, false, true, false],
            RealMatrix::from_rows(&rows).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            rank_mahalanobis_distances(&s),
            Err(Error::Singular { column: 1, .. })
        ));
    }

    #[test]
    fn duplicated_column_is_singular() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let s = CovariateSample::from_matrix(
            vec![true, false, false, true, false, false],
            RealMatrix::from_rows(&rows).unwrap(),
        )
        .unwrap();
        // x and x^2 have identical ranks on nonnegative x
        assert!(matches!(
            rank_mahalanobis_distances(&s),
            Err(Error::Singular { column: 1, .. })
        ));
    }

    #[test]
    fn absolute_difference_metrics() {
        let d = outcome_distances(&[1.0], &[-1.0, 1.0]).unwrap();
        assert_eq!(d.get(0, 0), 2.0);
        assert_eq!(d.get(0, 1), 0.0);
        let d = absolute_differences(&[2.0], &[0.5]).unwrap();
        assert_eq!(d.get(0, 0), 1.5);
        assert!(outcome_distances(&[], &[1.0]).is_err());
    }

    #[test]
    fn caliper_penalty_formula() {
        let x = [0.0, 0.4, 1.0, 1.9, 2.1, 3.0, 0.2, 2.5];
        let t = vec![true, false, true, false, false, true, false, false];
        let s =
            CovariateSample::from_matrix(t, RealMatrix::new(8, 1, x.to_vec()).unwrap()).unwrap();
        let model = logistic_fit(&s).unwrap();
        let base = propensity_distances(&model, &s).unwrap();
        let pen = apply_caliper(&base, &model, 1000.0).unwrap();
        for i in 0..base.n_treated() {
            for j in 0..base.n_control() {
                let gap = base.get(i, j);
                let expected = gap + 1000.0 * (gap - model.caliper_width).max(0.0);
                assert_abs_diff_eq!(pen.get(i, j), expected, epsilon = 1e-9);
            }
        }
        assert!(apply_caliper(&base, &model, 0.0).is_err());
    }
}
