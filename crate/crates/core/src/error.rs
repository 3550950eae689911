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

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("empty input")]
    EmptyInput,

    #[error("{count} column(s) not described by the taxonomy (allowed: {allowed}): {names:?}")]
    UnknownColumns {
        count: usize,
        allowed: usize,
        names: Vec<String>,
    },

    #[error("column not found: {0}")]
    ColumnNotFound(String),

    #[error("column {0} is not categorical")]
    NotCategorical(String),

    #[error("duplicate column name: {0}")]
    DuplicateColumn(String),

    #[error("feature mismatch: {0}")]
    FeatureMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("not found in registry: {kind} {name:?} (available: {available:?})")]
    NotRegistered {
        kind: &'static str,
        name: String,
        available: Vec<String>,
    },

    #[error("all grid-search candidates failed: {0}")]
    AllCandidatesFailed(String),

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

/// Attaches a pipeline stage name to an error.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| match e {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        })
    }
}
