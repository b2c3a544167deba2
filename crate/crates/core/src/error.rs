use thiserror::Error;

use crate::pipeline::wire::DecodeError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("malformed image: {0}")]
    Image(String),
    #[error("frame decode failed: {0}")]
    Decode(#[from] DecodeError),
    #[error("remote peer reported protocol error {code}: {message}")]
    Remote { code: u8, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid_arg(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
