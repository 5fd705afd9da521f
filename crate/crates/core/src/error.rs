use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// A malformed line in a text-based input file.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid dependency tree in sentence '{sent_id}': {reason}")]
    InvalidTree { sent_id: String, reason: String },

    // Container format errors. Each has its own kind so callers can tell a
    // foreign file from a damaged one.
    #[error("bad magic bytes {found:?}, expected \"CSEM\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated container: {0}")]
    Truncated(String),

    #[error("non-finite value in record '{id}' at row {row}, column {col}")]
    NonFinite { id: String, row: usize, col: usize },

    #[error("invalid container header: {0}")]
    Header(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("unknown label '{0}'")]
    UnknownLabel(String),

    #[error("missing embedding record for sentence '{0}'")]
    MissingRecord(String),

    /// Correlation is undefined when one side has zero rank variance.
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("tree with {n} nodes exceeds node cap {cap}")]
    NodeCapExceeded { n: usize, cap: usize },

    #[error("edit-distance search exceeded its budget of {budget} expansions")]
    SearchBudgetExceeded { budget: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
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

    /// True for failures caused by missing, unreadable or malformed inputs,
    /// as opposed to failures of the analysis itself.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::BadMagic { .. }
                | Error::UnsupportedVersion(_)
                | Error::Truncated(_)
                | Error::Header(_)
                | Error::Config(_)
                | Error::Json(_)
        )
    }
}
