//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by geometry, dataset, training, and evaluation code.
#[derive(Debug, Error)]
pub enum Error {
    /// A value failed domain validation (finite range, positivity, ...).
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// A line-oriented text input could not be parsed.
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    /// No anchor in the batch has a positive under the requested labels.
    #[error("degenerate label partition: no anchor has a positive")]
    DegeneratePartition,

    /// Loss or run configuration out of range.
    #[error("config error: {0}")]
    Config(String),

    /// Tensor/batch dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A patch could not be extracted from its source image.
    #[error("extraction error: {0}")]
    Extraction(String),

    /// Binary file magic/version/layout violation.
    #[error("format error: {0}")]
    Format(String),

    /// Filesystem failure, tagged with the offending path.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Image decode/encode failure.
    #[error("image error on {path}: {reason}")]
    Image { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
