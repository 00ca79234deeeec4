//! Crate-wide error type. Numerical routines fail loudly rather than
//! returning poisoned values; callers decide whether to retry or abort.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or vector shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Input violates a mathematical precondition (negative correlation,
    /// indefinite matrix, out-of-range parameter).
    #[error("domain error: {0}")]
    Domain(String),

    /// A positive definite solve hit a singular or ill-conditioned system.
    #[error("singular system: {0}")]
    Singular(String),

    /// A serialized codebook or config file is malformed or incompatible.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
