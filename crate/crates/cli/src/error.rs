use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("tolerance failure: {0}")]
    Tolerance(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Tolerance(_) => 3,
            CliError::Internal(_) => 4,
        })
    }
}

impl From<degpot::Error> for CliError {
    fn from(e: degpot::Error) -> Self {
        use degpot::Error as E;
        match e {
            E::InvalidCoefficient(_)
            | E::Assumption(_)
            | E::Geometry(_)
            | E::Resolution(_)
            | E::Support(_)
            | E::KindMismatch { .. }
            | E::Compatibility(_)
            | E::UnsupportedKind(_)
            | E::Domain { .. }
            | E::Order { .. }
            | E::Range { .. } => CliError::Config(e.to_string()),
            E::NonConvergence { .. } | E::Numerical(_) => CliError::Tolerance(e.to_string()),
            E::Solver(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}
