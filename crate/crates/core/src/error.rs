use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("no convergence after {iterations} iterations (marginal error {marginal_error:.3e})")]
    ConvergenceFailure { iterations: usize, marginal_error: f64 },

    #[error("unsupported plan kind: {0}")]
    UnsupportedPlanKind(&'static str),

    #[error("point outside the open unit ball (norm {norm})")]
    OutOfDomain { norm: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
