//! Run configuration: defaults, overridden by a JSON file, overridden by flags.

use std::fs;
use std::path::Path;

use clap::ValueEnum;
use matchdid::did::DEFAULT_ALPHA;
use matchdid::matching::{RankCovariance, DEFAULT_CALIPER_PENALTY};
use matchdid::simulation::tables::TableBase;
use matchdid::simulation::AnalysisOptions;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 20240101;
pub const DEFAULT_REPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    RankMahalanobis,
    Propensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub alpha: f64,
    /// Controls per treated unit.
    pub k: usize,
    pub metric: Metric,
    pub caliper: bool,
    pub caliper_penalty: f64,
    pub rank_covariance: RankCovariance,
    pub reps: usize,
    pub simulation: TableBase,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            alpha: DEFAULT_ALPHA,
            k: 1,
            metric: Metric::RankMahalanobis,
            caliper: true,
            caliper_penalty: DEFAULT_CALIPER_PENALTY,
            rank_covariance: RankCovariance::Rescaled,
            reps: DEFAULT_REPS,
            simulation: TableBase::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            alpha: self.alpha,
            caliper_penalty: self.caliper_penalty,
            rank_covariance: self.rank_covariance,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Input(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.k == 0 {
            return Err(CliError::Input("k must be at least 1".into()));
        }
        if !(self.caliper_penalty.is_finite() && self.caliper_penalty > 0.0) {
            return Err(CliError::Input(format!(
                "caliper_penalty must be positive, got {}",
                self.caliper_penalty
            )));
        }
        Ok(())
    }
}
