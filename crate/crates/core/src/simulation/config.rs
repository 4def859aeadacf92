use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::equicorrelation_matrix;

/// First setting: treated covariates are a scaled-up copy of the control
/// distribution and each unit's time trend is linear in its covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sim1Config {
    /// Number of covariates.
    pub d: usize,
    /// Common correlation between covariates (unit variances).
    pub rho: f64,
    pub n_treated: usize,
    pub n_control: usize,
    /// Treated covariate mean is `alpha_tr * (1, ..., 1)`; controls have mean 1.
    pub alpha_tr: f64,
    /// True treatment effect.
    pub delta: f64,
    /// Trend coefficients are i.i.d. uniform on `[beta_low, beta_high]`.
    pub beta_low: f64,
    pub beta_high: f64,
    /// Draw the trend coefficients once per run instead of once per
    /// replication.
    pub freeze_beta: bool,
}

impl Default for Sim1Config {
    fn default() -> Self {
        Self {
            d: 2,
            rho: 0.2,
            n_treated: 32,
            n_control: 320,
            alpha_tr: 1.25,
            delta: 2.0,
            beta_low: 2.0,
            beta_high: 3.0,
            freeze_beta: false,
        }
    }
}

impl Sim1Config {
    pub fn validate(&self) -> Result<()> {
        equicorrelation_matrix(self.d, self.rho)?;
        if self.n_treated < 2 {
            return Err(Error::Domain(format!(
                "need at least 2 treated units, got {}",
                self.n_treated
            )));
        }
        if self.n_control < self.n_treated {
            return Err(Error::Domain(format!(
                "n_control ({}) must be at least n_treated ({})",
                self.n_control, self.n_treated
            )));
        }
        check_range("beta", self.beta_low, self.beta_high)?;
        check_finite(&[("alpha_tr", self.alpha_tr), ("delta", self.delta)])
    }
}

/// Second setting: one covariate population; treatment and exposure to a
/// historical event both have probability `1 - Phi(intercept + beta'Z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sim2Config {
    pub n_total: usize,
    pub d: usize,
    pub rho: f64,
    /// True treatment effect.
    pub delta_treat: f64,
    /// Post-period shift for units the historical event reaches.
    pub delta_hist: f64,
    pub beta_low: f64,
    pub beta_high: f64,
    pub intercept: f64,
    /// Add a time-constant covariate term `beta_cov'Z` to every outcome, which
    /// makes pre-period outcomes informative about covariates.
    pub rtm_mode: bool,
    pub rtm_beta_low: f64,
    pub rtm_beta_high: f64,
    /// Draw a separate coefficient vector for the historical-event
    /// probability instead of sharing the treatment one.
    pub independent_hist_beta: bool,
    pub freeze_beta: bool,
}

impl Default for Sim2Config {
    fn default() -> Self {
        Self {
            n_total: 400,
            d: 8,
            rho: 0.2,
            delta_treat: -2.0,
            delta_hist: -2.0,
            beta_low: 0.2,
            beta_high: 0.3,
            intercept: 0.0,
            rtm_mode: false,
            rtm_beta_low: 0.2,
            rtm_beta_high: 0.3,
            independent_hist_beta: false,
            freeze_beta: false,
        }
    }
}

impl Sim2Config {
    pub fn validate(&self) -> Result<()> {
        equicorrelation_matrix(self.d, self.rho)?;
        if self.n_total < 50 {
            return Err(Error::Domain(format!(
                "n_total must be at least 50, got {}",
                self.n_total
            )));
        }
        check_range("beta", self.beta_low, self.beta_high)?;
        check_range("rtm_beta", self.rtm_beta_low, self.rtm_beta_high)?;
        check_finite(&[
            ("delta_treat", self.delta_treat),
            ("delta_hist", self.delta_hist),
            ("intercept", self.intercept),
        ])
    }
}

fn check_range(name: &str, low: f64, high: f64) -> Result<()> {
    if !(low.is_finite() && high.is_finite() && low <= high) {
        return Err(Error::Domain(format!(
            "{name} range [{low}, {high}] is invalid"
        )));
    }
    Ok(())
}

fn check_finite(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be finite, got {v}")));
        }
    }
    Ok(())
}

/// A data-generating process for the Monte Carlo engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "setting", rename_all = "lowercase")]
pub enum Scenario {
    Sim1(Sim1Config),
    Sim2(Sim2Config),
}

impl Scenario {
    pub fn true_effect(&self) -> f64 {
        match self {
            Scenario::Sim1(c) => c.delta,
            Scenario::Sim2(c) => c.delta_treat,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::Sim1(c) => c.validate(),
            Scenario::Sim2(c) => c.validate(),
        }
    }
}
