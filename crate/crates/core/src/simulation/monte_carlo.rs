//! Replicated simulation runs.
//!
//! Replication `r` draws its study from stream `r` of the master seed, so the
//! summaries do not depend on evaluation order, on thread count, or on which
//! other strategies are run alongside.

use serde::Serialize;

use super::config::Scenario;
use super::dgp::{gen_sim1, gen_sim2, SimulatedStudy, MAX_REGENERATIONS};
use super::strategy::{run_strategy, AnalysisOptions, Strategy, StrategyResult};
use crate::error::{Error, Result};
use crate::stats::{summary_stats, RngStream};

/// Tag for re-drawing a study whose analysis failed.
const RETRY_TAG: u64 = 0x7265_6472_6177_0000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub strategy: Strategy,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub mad_scaled: f64,
    /// Share of intervals containing the true effect.
    pub coverage: f64,
    pub mean_ci_length: f64,
    pub n_reps: usize,
}

impl ReplicationSummary {
    /// Monte Carlo standard error of `mean`.
    pub fn mc_se(&self) -> f64 {
        self.sd / (self.n_reps as f64).sqrt()
    }

    pub fn bias(&self, true_effect: f64) -> f64 {
        self.mean - true_effect
    }
}

pub fn generate(scenario: &Scenario, stream: RngStream) -> Result<SimulatedStudy> {
    match scenario {
        Scenario::Sim1(cfg) => gen_sim1(cfg, stream),
        Scenario::Sim2(cfg) => gen_sim2(cfg, stream),
    }
}

fn replicate_one(
    scenario: &Scenario,
    strategies: &[Strategy],
    stream: RngStream,
    options: &AnalysisOptions,
) -> Result<Vec<StrategyResult>> {
    let truth = scenario.true_effect();
    let first = generate(scenario, stream)?;
    strategies
        .iter()
        .map(|&strategy| {
            let mut cause = match run_strategy(&first, strategy, truth, options) {
                Ok(r) => return Ok(r),
                Err(e) => e,
            };
            // A failed analysis (e.g. a singular propensity design) is
            // retried on fresh draws from derived streams.
            for attempt in 1..MAX_REGENERATIONS {
                let study = generate(scenario, stream.derive(RETRY_TAG + attempt))?;
                match run_strategy(&study, strategy, truth, options) {
                    Ok(r) => return Ok(r),
                    Err(e) => cause = e,
                }
            }
            Err(cause)
        })
        .collect()
}

/// Per-replication results, `results[r][s]` for replication `r` and the
/// `s`-th strategy.
pub fn replicate(
    scenario: &Scenario,
    strategies: &[Strategy],
    n_reps: usize,
    master_seed: u64,
    options: &AnalysisOptions,
) -> Result<Vec<Vec<StrategyResult>>> {
    scenario.validate()?;
    if n_reps < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 replications, got {n_reps}"
        )));
    }
    let run = |r: usize| {
        replicate_one(
            scenario,
            strategies,
            RngStream::new(master_seed, r as u64),
            options,
        )
        .map_err(|e| Error::Replication {
            replication: r as u64,
            cause: Box::new(e),
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_reps).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_reps).map(run).collect()
    }
}

pub fn summarize(strategy: Strategy, results: &[StrategyResult]) -> Result<ReplicationSummary> {
    let points: Vec<f64> = results.iter().map(|r| r.estimate.point).collect();
    let stats = summary_stats(&points)?;
    let n = results.len() as f64;
    Ok(ReplicationSummary {
        strategy,
        mean: stats.mean,
        sd: stats.sd,
        median: stats.median,
        mad_scaled: stats.mad_scaled,
        coverage: results.iter().filter(|r| r.covered).count() as f64 / n,
        mean_ci_length: results.iter().map(|r| r.estimate.ci_length()).sum::<f64>() / n,
        n_reps: results.len(),
    })
}

/// One summary per strategy, in the order given.
pub fn monte_carlo(
    scenario: &Scenario,
    strategies: &[Strategy],
    n_reps: usize,
    master_seed: u64,
    options: &AnalysisOptions,
) -> Result<Vec<ReplicationSummary>> {
    let results = replicate(scenario, strategies, n_reps, master_seed, options)?;
    strategies
        .iter()
        .enumerate()
        .map(|(s, &strategy)| {
            let column: Vec<StrategyResult> = results.iter().map(|rep| rep[s]).collect();
            summarize(strategy, &column)
        })
        .collect()
}
