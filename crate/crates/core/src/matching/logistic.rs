//! Propensity model: logistic regression of treatment on covariates, fitted by
//! iteratively reweighted least squares (Newton-Raphson on the log-likelihood).

use serde::Serialize;

use super::sample::CovariateSample;
use crate::error::{Error, Result};
use crate::stats::linalg::{cholesky_lower, cholesky_solve};
use crate::stats::{ols_fit_named, sample_variance, RealMatrix};

/// Caliper width as a multiple of the SD of the logit propensity score.
pub const CALIPER_SD_MULTIPLE: f64 = 0.2;
/// Ridge penalty used when the unpenalized fit diverges.
pub const SEPARATION_RIDGE: f64 = 1e-4;

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-8;
/// Linear predictors this large mean fitted probabilities within ~1e-13 of
/// 0 or 1, which only happens on (quasi-)separated data.
const SEPARATION_ETA: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropensityModel {
    /// Intercept first, then one slope per covariate.
    pub coefficients: Vec<f64>,
    /// Linear predictor for every unit, in sample order.
    pub logit_scores: Vec<f64>,
    /// `0.2 * sd(logit_scores)`.
    pub caliper_width: f64,
    /// True when separation forced the ridge-penalized refit.
    pub ridge_fallback: bool,
    pub iterations: usize,
    treated: Vec<bool>,
}

impl PropensityModel {
    pub fn treated_logits(&self) -> Vec<f64> {
        self.logit_scores
            .iter()
            .zip(&self.treated)
            .filter(|(_, &t)| t)
            .map(|(&l, _)| l)
            .collect()
    }

    pub fn control_logits(&self) -> Vec<f64> {
        self.logit_scores
            .iter()
            .zip(&self.treated)
            .filter(|(_, &t)| !t)
            .map(|(&l, _)| l)
            .collect()
    }

    pub fn treated_mask(&self) -> &[bool] {
        &self.treated
    }

    pub fn fitted_probabilities(&self) -> Vec<f64> {
        self.logit_scores.iter().map(|&e| sigmoid(e)).collect()
    }
}

#[inline]
fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^eta) without overflow.
#[inline]
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

struct Fit {
    beta: Vec<f64>,
    iterations: usize,
    converged: bool,
    diverged: bool,
}

fn penalized_loglik(x: &RealMatrix, y: &[f64], beta: &[f64], ridge: f64) -> f64 {
    let mut ll = 0.0;
    for i in 0..x.rows() {
        let eta: f64 = x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum();
        ll += y[i] * eta - softplus(eta);
    }
    ll - 0.5 * ridge * beta[1..].iter().map(|b| b * b).sum::<f64>()
}

fn irls(x: &RealMatrix, y: &[f64], ridge: f64) -> Result<Fit> {
    let n = x.rows();
    let p = x.cols();
    let mut beta = vec![0.0; p];
    let mut ll = penalized_loglik(x, y, &beta, ridge);

    for iter in 0..MAX_ITER {
        let mut grad = vec![0.0; p];
        let mut info = RealMatrix::zeros(p, p);
        for i in 0..n {
            let row = x.row(i);
            let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = sigmoid(eta);
            let w = mu * (1.0 - mu);
            let r = y[i] - mu;
            for a in 0..p {
                grad[a] += row[a] * r;
                let wa = w * row[a];
                for b in a..p {
                    info[(a, b)] += wa * row[b];
                }
            }
        }
        for a in 0..p {
            if a > 0 {
                grad[a] -= ridge * beta[a];
                info[(a, a)] += ridge;
            }
            for b in 0..a {
                info[(a, b)] = info[(b, a)];
            }
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < GRAD_TOL {
            return Ok(Fit {
                beta,
                iterations: iter,
                converged: true,
                diverged: false,
            });
        }
        let l = match cholesky_lower(&info) {
            Ok(l) => l,
            // information collapsed: fitted probabilities saturated
            Err(_) => {
                return Ok(Fit {
                    beta,
                    iterations: iter,
                    converged: false,
                    diverged: true,
                })
            }
        };
        let mut step = cholesky_solve(&l, &grad);
        let mut candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + s).collect();
        let mut cand_ll = penalized_loglik(x, y, &candidate, ridge);
        let mut halvings = 0;
        while cand_ll < ll - 1e-12 * ll.abs().max(1.0) && halvings < 40 {
            for s in step.iter_mut() {
                *s *= 0.5;
            }
            candidate = beta.iter().zip(&step).map(|(b, s)| b + s).collect();
            cand_ll = penalized_loglik(x, y, &candidate, ridge);
            halvings += 1;
        }
        let step_max = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        beta = candidate;
        ll = cand_ll;

        let eta_max = (0..n)
            .map(|i| {
                x.row(i)
                    .iter()
                    .zip(&beta)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max);
        if ridge == 0.0 && eta_max > SEPARATION_ETA {
            return Ok(Fit {
                beta,
                iterations: iter + 1,
                converged: false,
                diverged: true,
            });
        }
        let beta_max = beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        // Rounding floor: the Newton step no longer moves the estimate.
        if step_max <= 1e-13 * beta_max.max(1.0) {
            return Ok(Fit {
                beta,
                iterations: iter + 1,
                converged: true,
                diverged: false,
            });
        }
    }
    Ok(Fit {
        beta,
        iterations: MAX_ITER,
        converged: false,
        diverged: false,
    })
}

/// Fits `P(treated | covariates)` with an intercept.
///
/// On separated data the unpenalized likelihood has no maximizer; the fit is
/// then repeated with a small ridge penalty on the slopes and
/// `ridge_fallback` is set.
pub fn logistic_fit(sample: &CovariateSample) -> Result<PropensityModel> {
    let n = sample.len();
    let d = sample.covariates().cols();
    if n <= d + 1 {
        return Err(Error::Domain(format!(
            "logistic fit needs more than {} units, got {n}",
            d + 1
        )));
    }
    let mut data = Vec::with_capacity(n * (d + 1));
    for i in 0..n {
        data.push(1.0);
        data.extend_from_slice(sample.covariates().row(i));
    }
    let x = RealMatrix::new(n, d + 1, data)?;
    let y: Vec<f64> = sample
        .treated()
        .iter()
        .map(|&t| if t { 1.0 } else { 0.0 })
        .collect();

    let mut names = vec!["(intercept)".to_string()];
    names.extend(sample.covariate_names().iter().cloned());
    // Rank check up front: a collinear design is an error, not separation.
    ols_fit_named(&x, &y, &names)?;

    let mut fit = irls(&x, &y, 0.0)?;
    let mut ridge_fallback = false;
    if fit.diverged || !fit.converged {
        fit = irls(&x, &y, SEPARATION_RIDGE)?;
        ridge_fallback = true;
        if !fit.converged {
            return Err(Error::Domain(format!(
                "logistic fit did not converge in {MAX_ITER} iterations even with ridge penalty"
            )));
        }
    }

    let logit_scores: Vec<f64> = (0..n)
        .map(|i| x.row(i).iter().zip(&fit.beta).map(|(a, b)| a * b).sum())
        .collect();
    let caliper_width = CALIPER_SD_MULTIPLE * sample_variance(&logit_scores).sqrt();
    Ok(PropensityModel {
        coefficients: fit.beta,
        logit_scores,
        caliper_width,
        ridge_fallback,
        iterations: fit.iterations,
        treated: sample.treated().to_vec(),
    })
}
