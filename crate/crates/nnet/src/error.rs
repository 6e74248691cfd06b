use std::io;

#[derive(Debug, thiserror::Error)]
pub enum NnetError {
    /// Input or parameter dimensions do not match the architecture.
    #[error("shape error: {0}")]
    Shape(String),
    /// A checkpoint file is malformed or corrupted.
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NnetError>;

pub(crate) fn shape(msg: impl Into<String>) -> NnetError {
    NnetError::Shape(msg.into())
}
