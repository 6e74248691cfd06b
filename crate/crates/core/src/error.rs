use std::io;

/// Errors raised by the simulation and dataset routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configuration is invalid or cannot satisfy the request.
    #[error("configuration error: {0}")]
    Config(String),
    /// A file does not follow the expected container format.
    #[error("format error: {0}")]
    Format(String),
    /// The sweep produced no distinguishable minimum.
    #[error("ambiguous estimate: {0}")]
    Ambiguous(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
