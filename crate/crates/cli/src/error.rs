use std::process::ExitCode;

use thiserror::Error;

/// Errors surfaced to the user, each with its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Infeasible(_) => ExitCode::from(3),
            CliError::Internal(_) => ExitCode::from(1),
        }
    }
}

impl From<matchdid::Error> for CliError {
    fn from(e: matchdid::Error) -> Self {
        use matchdid::Error as E;
        match e {
            E::Infeasible(_) => CliError::Infeasible(e.to_string()),
            E::Replication { ref cause, .. } if matches!(**cause, E::Infeasible(_)) => {
                CliError::Infeasible(e.to_string())
            }
            E::Replication { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
