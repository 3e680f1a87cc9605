//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown frame label `{0}`")]
    UnknownFrame(String),

    #[error("unknown article id `{0}`")]
    UnknownArticle(String),

    #[error("embedding matrix has {rows} rows but the corpus has {articles} articles")]
    RowCountMismatch { rows: usize, articles: usize },

    #[error("embedding id sidecars disagree at row {row}: `{content}` vs `{frame}`")]
    SidecarMismatch {
        row: usize,
        content: String,
        frame: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty history")]
    EmptyHistory,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("distribution not normalized: mass sums to {sum}")]
    NotNormalized { sum: f64 },

    #[error("contrastive batch has no anchor with a positive")]
    NoPositives,

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("degenerate synthesis spec: {0}")]
    DegenerateSpec(String),

    #[error(
        "degenerate contingency table: need at least 2 rows and 2 columns with nonzero marginals"
    )]
    DegenerateTable,

    #[error("zero total variance: eta squared is undefined")]
    ZeroVariance,

    #[error("auc undefined: slate has no positive/negative pair")]
    AucUndefined,

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid value: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
