use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time {t} outside [0, {horizon}]")]
    Domain { t: f64, horizon: f64 },
    #[error("time order violated: tau = {tau} > t = {t}")]
    Order { t: f64, tau: f64 },
    #[error("value {value} outside admissible range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("resolution too small: {0}")]
    Resolution(String),
    #[error("support error: {0}")]
    Support(String),
    #[error("density kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: &'static str, got: &'static str },
    #[error("compatibility condition g(.,0) = 0 violated: max |g(.,0)| = {0:e}")]
    Compatibility(f64),
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("no convergence after {iterations} iterations (last increment {last_increment:e})")]
    NonConvergence { iterations: usize, last_increment: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("unsupported potential kind: {0}")]
    UnsupportedKind(String),
}

pub type Result<T> = std::result::Result<T, Error>;
