//! Numerical primitives shared by the estimators and simulations.

pub mod dist;
pub mod linalg;
pub mod ols;
pub mod rank;
pub mod rng;
pub mod summary;

pub use dist::{
    std_normal_cdf, std_normal_quantile, student_t_cdf, student_t_quantile, student_t_two_sided_p,
};
pub use linalg::{cholesky_lower, equicorrelation_matrix, RealMatrix};
pub use ols::{ols_fit, ols_fit_named, OlsFit};
pub use rank::{average_ranks, rank_transform};
pub use rng::{mvn_sample, RngStream, StreamRng};
pub use summary::{mean, median, sample_variance, summary_stats, SummaryStats, MAD_SCALE};
