use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller handed in data with the wrong shape, range or layout.
    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("ingestion error in {path}: row {row}, column {column}: {message}")]
    Ingestion {
        path: PathBuf,
        /// 1-based line number in the file (the header is line 1); 0 when not row specific.
        row: usize,
        column: String,
        message: String,
    },

    #[error("partitioning failed: {0}")]
    Partition(String),

    #[error("training diverged at participant {participant}, round {round}: {detail}")]
    Divergence {
        participant: usize,
        round: u64,
        detail: String,
    },

    #[error("augmentation planning failed: {0}")]
    Planning(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            Error::Divergence { .. } => 3,
            Error::Ingestion { .. } => 4,
            Error::Partition(_) | Error::Planning(_) | Error::UndefinedMetric(_) => 5,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
        }
    }
}
