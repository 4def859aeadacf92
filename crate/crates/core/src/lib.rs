//! Matched-control difference-in-differences.
//!
//! The crate is organised the way an analysis flows:
//!
//! * [`stats`] holds the numerical primitives (distributions, dense linear
//!   algebra, least squares, reproducible random streams).
//! * [`matching`] builds a closely matched control group: propensity model,
//!   rank-based Mahalanobis distances, caliper penalties, optimal 1:k
//!   assignment and covariate balance tables.
//! * [`did`] turns matched pairs or a two-period panel into a
//!   difference-in-differences estimate with a t-based confidence interval,
//!   and tests for parallel pre-period trends.
//! * [`simulation`] generates the two synthetic settings used to study bias
//!   from historical events interacting with group, and runs replicated
//!   Monte Carlo comparisons of matching strategies.

pub mod did;
pub mod error;
pub mod matching;
pub mod simulation;
pub mod stats;

pub use error::{Error, Result};
