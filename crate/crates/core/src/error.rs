use std::path::PathBuf;

/// Errors surfaced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("optimizer error: {0}")]
    Optimizer(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("run not found: {0}")]
    NotFound(String),
    #[error("corrupted artifact {path}: {reason}")]
    Corruption { path: PathBuf, reason: String },
    #[error("run rejected: {0}")]
    Rejected(String),
    #[error("scan interrupted after {completed} runs")]
    Interrupted { completed: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
