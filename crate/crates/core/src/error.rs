use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the relation-embedding toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("unknown entity pair ({0}, {1})")]
    UnknownPair(String, String),

    #[error("corpus too small: {0}")]
    CorpusTooSmall(String),

    #[error("shape mismatch for {name}: expected {expected}, found {found}")]
    Shape {
        name: String,
        expected: String,
        found: String,
    },

    #[error("non-finite loss at iteration {iteration} (article {article_id})")]
    NonFinite { iteration: usize, article_id: String },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
