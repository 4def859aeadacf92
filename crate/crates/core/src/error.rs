use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix or vector shapes that do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Cholesky pivot was not strictly positive.
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    /// A design or covariance matrix lost rank at the named column.
    #[error("singular matrix: column {column} ({name}) is linearly dependent on earlier columns")]
    Singular { column: usize, name: String },

    /// The requested matching cannot be formed with the available units.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Units that are required but missing observations.
    #[error("missing data for units: {}", .0.join(", "))]
    MissingData(Vec<String>),

    /// Inconsistent or malformed input data.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A simulated replication could not be completed.
    #[error("replication {replication} failed: {cause}")]
    Replication { replication: u64, cause: Box<Error> },
}
