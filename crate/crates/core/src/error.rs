use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid UTF-8 at byte offset {offset}")]
    Decode { offset: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}:{line}: {message}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}:{line}: expected {expected}-gram, found {found} tokens", file.display())]
    Schema {
        file: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("usage error: {0}")]
    Usage(String),

    // The io error is part of the message, not a separate source, so
    // chained reports do not repeat it.
    #[error("{}: {err}", path.display())]
    Io { path: PathBuf, err: std::io::Error },

    #[error("count overflow: {0}")]
    Overflow(String),

    #[error("scoring error: {0}")]
    Scoring(String),

    #[error("training data error: {0}")]
    TrainingData(String),

    #[error("model error: {0}")]
    Model(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            err: source,
        }
    }
}
