//! Synthetic studies of bias from historical events that hit treated and
//! control groups differently, and the Monte Carlo engine that compares
//! unmatched and matched difference-in-differences on them.

mod bias;
mod config;
mod dgp;
mod monte_carlo;
mod strategy;
pub mod tables;

pub use bias::{bias_decomposition, BiasTerms};
pub use config::{Scenario, Sim1Config, Sim2Config};
pub use dgp::{
    calibrate_beta_scale, calibrate_intercept, gen_sim1, gen_sim2, SimulatedStudy, StudyKind,
    CALIBRATION_DRAWS, FROZEN_BETA_STREAM, MAX_REGENERATIONS,
};
pub use monte_carlo::{generate, monte_carlo, replicate, summarize, ReplicationSummary};
pub use strategy::{
    pair_differences, run_strategy, strategy_assignment, AnalysisOptions, Strategy, StrategyResult,
};
