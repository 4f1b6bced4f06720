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

    #[error("decode error: {0}")]
    Decode(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("clip too short: {seconds:.4} s, need at least {min_seconds} s at {sample_rate} Hz")]
    TooShort {
        seconds: f64,
        min_seconds: f64,
        sample_rate: u32,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("need at least {needed} values, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("AUC is undefined when only one class is present")]
    UndefinedAuc,

    #[error("state error: {0}")]
    State(String),

    #[error("leakage guard: {0}")]
    Leakage(String),

    #[error("layout mismatch: expected {expected} columns, got {actual}")]
    Layout { expected: usize, actual: usize },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("fold {fold} failed: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} clips failed to extract")]
    Extraction { failed: usize, total: usize },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
