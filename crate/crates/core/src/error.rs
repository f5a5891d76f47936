use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, TvError>;

#[derive(Debug, Error)]
pub enum TvError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The measurement operator vanishes (estimated norm is zero).
    #[error("degenerate operator: estimated norm is zero")]
    DegenerateOperator,

    /// Constant signals lie in the kernel of the operator, so minimizers need not exist.
    #[error("constant signals are annihilated by the measurement operator")]
    KernelCondition,

    #[error("operator norm {0} is not below 1; normalize the problem first")]
    NotNormalized(f64),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl TvError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        TvError::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TvError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        TvError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
