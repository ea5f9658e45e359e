//! Error type shared by every module of the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("size mismatch: {left} points against {right} points")]
    SizeMismatch { left: usize, right: usize },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("assignment of size {n} exceeds solver capacity {capacity}")]
    Capacity { n: usize, capacity: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("bound `{bound}` is not applicable: {reason}")]
    Inapplicable { bound: String, reason: String },

    #[error("chain diverged at iteration {iteration}: |x| = {norm:e}")]
    Diverged { iteration: usize, norm: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics themselves (as opposed to bad input
    /// or configuration).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NotSpd(_) | Error::Diverged { .. } | Error::Numerical(_) | Error::Capacity { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
