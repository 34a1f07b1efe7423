use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = XrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum XrError {
    #[error("action id {0} is outside 0..=17")]
    InvalidAction(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("episode already finished")]
    EpisodeFinished,

    #[error("non-finite network input")]
    NonFiniteInput,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("parse error in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl XrError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        XrError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        XrError::Io {
            path: path.into(),
            source,
        }
    }
}
