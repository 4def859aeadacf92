//! Data-generating processes for the two simulation settings.

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::{Sim1Config, Sim2Config};
use crate::error::{Error, Result};
use crate::matching::CovariateSample;
use crate::stats::dist::phi;
use crate::stats::{equicorrelation_matrix, mvn_sample, RealMatrix, RngStream, StreamRng};

/// Stream id reserved for coefficient draws shared across replications.
pub const FROZEN_BETA_STREAM: u64 = u64::MAX;
/// Attempts at drawing a non-degenerate study before giving up.
pub const MAX_REGENERATIONS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StudyKind {
    /// Matched on rank-based Mahalanobis distance with a propensity caliper.
    Sim1,
    /// Matched on the propensity score.
    Sim2,
}

/// One simulated two-period study. All per-unit vectors are in sample order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedStudy {
    pub kind: StudyKind,
    pub covariates: CovariateSample,
    pub pre_outcomes: Vec<f64>,
    pub post_outcomes: Vec<f64>,
    pub treated: Vec<bool>,
    /// Whether the historical event reached the unit (second setting only).
    pub hist_impacted: Option<Vec<bool>>,
    /// True probability of being reached by the historical event.
    pub true_event_probs: Option<Vec<f64>>,
}

impl SimulatedStudy {
    pub fn len(&self) -> usize {
        self.treated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treated.is_empty()
    }
}

fn uniform_vector(rng: &mut StreamRng, d: usize, low: f64, high: f64) -> Result<Vec<f64>> {
    let u = Uniform::new_inclusive(low, high)
        .map_err(|e| Error::Domain(format!("uniform [{low}, {high}]: {e}")))?;
    Ok((0..d).map(|_| u.sample(rng)).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Draws a first-setting study: `n_treated` treated units followed by
/// `n_control` controls.
pub fn gen_sim1(cfg: &Sim1Config, stream: RngStream) -> Result<SimulatedStudy> {
    cfg.validate()?;
    let d = cfg.d;
    let cov = equicorrelation_matrix(d, cfg.rho)?;
    let mut rng = stream.generator();
    let beta = if cfg.freeze_beta {
        let mut frozen = RngStream::new(stream.seed, FROZEN_BETA_STREAM).generator();
        uniform_vector(&mut frozen, d, cfg.beta_low, cfg.beta_high)?
    } else {
        uniform_vector(&mut rng, d, cfg.beta_low, cfg.beta_high)?
    };
    let z_treated = mvn_sample(&mut rng, &vec![cfg.alpha_tr; d], &cov, cfg.n_treated)?;
    let z_control = mvn_sample(&mut rng, &vec![1.0; d], &cov, cfg.n_control)?;
    let n = cfg.n_treated + cfg.n_control;

    let mut data = Vec::with_capacity(n * d);
    data.extend_from_slice(z_treated.as_slice());
    data.extend_from_slice(z_control.as_slice());
    let z = RealMatrix::new(n, d, data)?;
    let treated: Vec<bool> = (0..n).map(|i| i < cfg.n_treated).collect();

    let pre_outcomes: Vec<f64> = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let post_outcomes: Vec<f64> = (0..n)
        .map(|i| {
            let slope = dot(&beta, z.row(i)) + if treated[i] { cfg.delta } else { 0.0 };
            slope + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();

    Ok(SimulatedStudy {
        kind: StudyKind::Sim1,
        covariates: CovariateSample::from_matrix(treated.clone(), z)?,
        pre_outcomes,
        post_outcomes,
        treated,
        hist_impacted: None,
        true_event_probs: None,
    })
}

/// Draws a second-setting study.
///
/// A draw with fewer than two treated units, or more treated than controls,
/// cannot be pair matched; it is redrawn from the next sub-stream, at most
/// [`MAX_REGENERATIONS`] times.
pub fn gen_sim2(cfg: &Sim2Config, stream: RngStream) -> Result<SimulatedStudy> {
    cfg.validate()?;
    let mut last = String::new();
    for attempt in 0..MAX_REGENERATIONS {
        match draw_sim2(cfg, stream, stream.substream(attempt))? {
            Ok(study) => return Ok(study),
            Err(reason) => last = reason,
        }
    }
    Err(Error::Infeasible(format!(
        "no usable draw in {MAX_REGENERATIONS} attempts (last had {last})"
    )))
}

/// Inner `Err` carries why the draw is unusable for pair matching.
fn draw_sim2(
    cfg: &Sim2Config,
    base: RngStream,
    stream: RngStream,
) -> Result<std::result::Result<SimulatedStudy, String>> {
    let d = cfg.d;
    let n = cfg.n_total;
    let cov = equicorrelation_matrix(d, cfg.rho)?;
    let mut rng = stream.generator();

    let mut frozen = RngStream::new(base.seed, FROZEN_BETA_STREAM).generator();
    let coef_rng: &mut StreamRng = if cfg.freeze_beta {
        &mut frozen
    } else {
        &mut rng
    };
    let beta = uniform_vector(coef_rng, d, cfg.beta_low, cfg.beta_high)?;
    let beta_hist = if cfg.independent_hist_beta {
        uniform_vector(coef_rng, d, cfg.beta_low, cfg.beta_high)?
    } else {
        beta.clone()
    };
    let beta_cov = if cfg.rtm_mode {
        Some(uniform_vector(
            coef_rng,
            d,
            cfg.rtm_beta_low,
            cfg.rtm_beta_high,
        )?)
    } else {
        None
    };

    let z = mvn_sample(&mut rng, &vec![1.0; d], &cov, n)?;
    let mut treated = Vec::with_capacity(n);
    let mut impacted = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    let mut pre = Vec::with_capacity(n);
    let mut post = Vec::with_capacity(n);
    for i in 0..n {
        let row = z.row(i);
        // 1 - Phi(s) = Phi(-s)
        let p_treat = phi(-(cfg.intercept + dot(&beta, row)));
        let p_hist = phi(-(cfg.intercept + dot(&beta_hist, row)));
        let tr = rng.random::<f64>() < p_treat;
        let h = rng.random::<f64>() < p_hist;
        let level = beta_cov.as_ref().map_or(0.0, |b| dot(b, row));
        let shift = if h { cfg.delta_hist } else { 0.0 } + if tr { cfg.delta_treat } else { 0.0 };
        pre.push(level + rng.sample::<f64, _>(StandardNormal));
        post.push(level + shift + rng.sample::<f64, _>(StandardNormal));
        treated.push(tr);
        impacted.push(h);
        probs.push(p_hist);
    }

    let n_treated = treated.iter().filter(|&&t| t).count();
    if n_treated < 2 || n - n_treated < n_treated {
        return Ok(Err(format!(
            "{n_treated} treated and {} controls",
            n - n_treated
        )));
    }
    Ok(Ok(SimulatedStudy {
        kind: StudyKind::Sim2,
        covariates: CovariateSample::from_matrix(treated.clone(), z)?,
        pre_outcomes: pre,
        post_outcomes: post,
        treated,
        hist_impacted: Some(impacted),
        true_event_probs: Some(probs),
    }))
}

/// Monte Carlo draws used for intercept calibration.
pub const CALIBRATION_DRAWS: usize = 100_000;

/// Linear scores `beta'Z` for [`CALIBRATION_DRAWS`] joint draws of the
/// coefficients and covariates.
fn calibration_scores(cfg: &Sim2Config, target: f64, stream: RngStream) -> Result<Vec<f64>> {
    cfg.validate()?;
    if !(target > 0.0 && target < 0.9) {
        return Err(Error::Domain(format!(
            "target treated fraction must be in (0, 0.9), got {target}"
        )));
    }
    let d = cfg.d;
    let cov = equicorrelation_matrix(d, cfg.rho)?;
    let mut rng = stream.generator();
    let z = mvn_sample(&mut rng, &vec![1.0; d], &cov, CALIBRATION_DRAWS)?;
    (0..CALIBRATION_DRAWS)
        .map(|i| {
            let beta = uniform_vector(&mut rng, d, cfg.beta_low, cfg.beta_high)?;
            Ok(dot(&beta, z.row(i)))
        })
        .collect()
}

/// Bisection for a decreasing `fraction` on `[lo, hi]`.
fn bisect_fraction(
    fraction: impl Fn(f64) -> f64,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    what: &str,
) -> Result<f64> {
    if !(fraction(lo) >= target && fraction(hi) <= target) {
        return Err(Error::Domain(format!(
            "{what} search range [{lo}, {hi}] does not bracket treated fraction {target}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fraction(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    let achieved = fraction(x);
    if (achieved - target).abs() > 0.005 {
        return Err(Error::Domain(format!(
            "{what} calibration reached {achieved}, target {target}"
        )));
    }
    Ok(x)
}

/// Finds the intercept that makes the expected treated fraction of the
/// second setting equal `target`.
///
/// The expected fraction `E[1 - Phi(c + beta'Z)]` is averaged over
/// [`CALIBRATION_DRAWS`] joint draws of the coefficients and covariates (a
/// common sample for every `c`, so the estimate is monotone in `c`) and the
/// root is found by bisection.
pub fn calibrate_intercept(cfg: &Sim2Config, target: f64, stream: RngStream) -> Result<f64> {
    let scores = calibration_scores(cfg, target, stream)?;
    let fraction = |c: f64| scores.iter().map(|s| phi(-(c + s))).sum::<f64>() / scores.len() as f64;
    bisect_fraction(fraction, target, -20.0, 20.0, "intercept")
}

/// Finds `k` such that multiplying the coefficient range by `k` (keeping the
/// configured intercept) gives expected treated fraction `target`.
///
/// Unlike an intercept shift, this weakens selection on the covariates, so
/// the exposure probabilities of treated and controls move closer together.
pub fn calibrate_beta_scale(cfg: &Sim2Config, target: f64, stream: RngStream) -> Result<f64> {
    let scores = calibration_scores(cfg, target, stream)?;
    let c = cfg.intercept;
    let fraction =
        |k: f64| scores.iter().map(|s| phi(-(c + k * s))).sum::<f64>() / scores.len() as f64;
    bisect_fraction(fraction, target, 0.0, 16.0, "coefficient scale")
}
