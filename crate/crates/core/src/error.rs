//! Error type shared by every module of the toolkit.

use std::path::PathBuf;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("severity {0} is outside 1..=5")]
    SeverityOutOfRange(i64),

    #[error("unknown corruption kind `{0}`")]
    UnknownKind(String),

    #[error("patch pool is empty")]
    EmptyPool,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("taxonomy: {0}")]
    Taxonomy(String),

    #[error("plan: {0}")]
    Plan(String),

    #[error("session: {0}")]
    Session(String),

    #[error("unknown session `{0}`")]
    UnknownSession(String),

    #[error("session `{0}` is closed")]
    SessionClosed(String),

    #[error("format: {0}")]
    Format(String),

    #[error("vlm: {0}")]
    Vlm(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
