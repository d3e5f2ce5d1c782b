use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("row {row}, column `{column}`: value {value} outside [0, 1]")]
    AttributeOutOfRange {
        row: usize,
        column: String,
        value: f64,
    },

    #[error("row {row}: unknown city `{city}`")]
    UnknownCity { row: usize, city: String },

    #[error("duplicate city `{0}` in metadata")]
    DuplicateCity(String),

    #[error("city `{city}`: {field} {value} out of range")]
    CoordinateOutOfRange {
        city: String,
        field: &'static str,
        value: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular design matrix ({0} columns)")]
    Singular(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

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

    /// Process exit code: 1 usage, 2 data error, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::InvalidArgument(_) | Error::Config(_) => 1,
            Error::Singular(_) | Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}
