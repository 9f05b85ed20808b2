use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: rating {value} outside 1..=5")]
    RatingOutOfRange {
        path: PathBuf,
        line: u64,
        value: i64,
    },

    #[error("catalog has no item_id column")]
    MissingItemId,

    #[error("unknown feature '{0}'")]
    UnknownFeature(String),

    #[error("no label of feature '{feature}' occurs at least {min_count} times")]
    NoLabels { feature: String, min_count: usize },

    #[error("need at least 2 observations, got {0}")]
    InsufficientData(usize),

    #[error("need at least 2 labels, got {0}")]
    InsufficientLabels(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("cut iteration {c} outside 1..={max}")]
    CutOutOfRange { c: usize, max: usize },

    #[error("k = {k} exceeds the {distinct} distinct rows")]
    TooManyClusters { k: usize, distinct: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("linear system is not positive definite")]
    Singular,

    #[error("config error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
