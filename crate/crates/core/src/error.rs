use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// `row` is the 1-based record number in the file, header excluded.
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("degenerate feature column {column} ({name}): column sum is zero")]
    DegenerateFeature { column: usize, name: String },

    #[error("invalid bound: {0}")]
    InvalidBound(String),

    #[error("invalid class count {0}: multiclass needs at least 2 classes")]
    InvalidClassCount(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("degenerate gradient: {0}")]
    DegenerateGradient(String),

    #[error(
        "penultimate activations are all zero (K_z = 0), the learning rate would be infinite; \
         configure a first-epoch learning-rate override"
    )]
    ZeroActivations,

    #[error("invalid tolerance {0}: must be positive")]
    InvalidTolerance(f64),

    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
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
