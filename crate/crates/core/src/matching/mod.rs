//! Building a closely matched control group.
//!
//! The usual pipeline is [`logistic_fit`] for the propensity model,
//! [`rank_mahalanobis_distances`] on the covariates, [`apply_caliper`] to
//! penalize pairs far apart on the logit propensity score, then
//! [`optimal_match`] and [`standardized_differences`] to check balance.

mod assignment;
mod balance;
mod distance;
mod logistic;
mod sample;

pub use assignment::{optimal_match, optimal_match_sorted, PairAssignment};
pub use balance::{standardized_differences, BalanceRow, BalanceTable};
pub use distance::{
    apply_caliper, outcome_distances, propensity_distances, rank_mahalanobis_distances,
    rank_mahalanobis_distances_with, DistanceMatrix, RankCovariance, DEFAULT_CALIPER_PENALTY,
};
pub use logistic::{logistic_fit, PropensityModel, CALIPER_SD_MULTIPLE, SEPARATION_RIDGE};
pub use sample::CovariateSample;
