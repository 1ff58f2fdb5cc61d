use std::path::PathBuf;

/// Errors raised by the analytic operations, samplers and the experiment runner.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid state {0}: states must be non-negative here")]
    InvalidState(i64),

    #[error("wrong boundary mode: {0}")]
    WrongMode(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
