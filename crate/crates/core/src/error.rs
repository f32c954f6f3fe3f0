//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by planning, rendering, calibration, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's preconditions.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input is structurally valid but numerically unusable
    /// (rank-deficient system, zero translation scale, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A computation left the numerically trustworthy regime
    /// (near-singular covariance, condition number blow-up).
    #[error("numerical domain error: {0}")]
    Numerical(String),

    /// Every candidate view was rejected; the planner cannot advance.
    #[error("no viable candidate view")]
    NoViableCandidate,

    /// Malformed file contents.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
