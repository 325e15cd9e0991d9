use thiserror::Error;

/// Errors produced by the core pipeline.
///
/// Row-level ingest problems are not errors: they are counted per reason in
/// an [`crate::ingest::IngestReport`]. `Error` covers the fatal cases only.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{column}` in header of {path}")]
    MissingColumn { column: String, path: String },

    #[error("unknown station id {0}")]
    UnknownStation(u32),

    #[error("feature dimension mismatch: model expects {expected}, input has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
