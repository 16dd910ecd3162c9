use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("index line {line}: {message}")]
    IndexParse { line: usize, message: String },

    #[error("record {id}: image file missing or unreadable ({path})")]
    MissingImage { id: String, path: PathBuf },

    #[error("duplicate record id {0}")]
    DuplicateId(String),

    #[error("unsupported image format for {0} (only PNG is accepted)")]
    UnsupportedFormat(PathBuf),

    #[error("invalid {field}: {message}")]
    InvalidField { field: &'static str, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("provider unavailable (retryable): {0}")]
    Unavailable(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("mask has no set pixels")]
    EmptyMask,

    #[error("homography is not invertible")]
    NonInvertible,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn field(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidField {
            field,
            message: message.into(),
        }
    }

    /// True for failures that may succeed when retried unchanged.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Unavailable(_))
    }
}
