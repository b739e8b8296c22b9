//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the sehfs library.
#[derive(Debug, Error)]
pub enum Error {
    /// Filesystem-level failure (missing file, unreadable path, ...).
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed CSV payload.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Malformed or inconsistent dataset manifest.
    #[error("manifest error: {0}")]
    Manifest(String),

    /// Matrix/vector dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numeric computation produced NaN/Inf or violated an internal
    /// consistency bound; carries enough context to locate the failure.
    #[error("numerical abort at iteration {iteration} in {context}")]
    Numerical { iteration: usize, context: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn manifest(msg: impl Into<String>) -> Self {
        Error::Manifest(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
