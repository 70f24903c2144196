//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    /// Corpus or input data failed validation.
    #[error("validation failed: {}", errors.join("; "))]
    Validation { errors: Vec<String> },

    /// Tensor or layer dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A model of one kind was given to an operation expecting the other.
    #[error("classifier kind mismatch: {0}")]
    KindMismatch(String),

    /// Bad configuration or arguments to an operation.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Numeric failure (non-finite loss, degenerate matrix, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), detail: detail.into() }
    }

    pub fn invalid(detail: impl Into<String>) -> Self {
        Error::Invalid(detail.into())
    }

    pub fn shape(detail: impl Into<String>) -> Self {
        Error::Shape(detail.into())
    }

    /// Process exit code for the CLI: 1 for bad input, 2 for i/o and internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Numeric(_) => 2,
            _ => 1,
        }
    }
}
