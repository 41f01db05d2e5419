use std::io;

use thiserror::Error;

/// Errors produced across the mapping toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented precondition.
    #[error("configuration error: {0}")]
    Config(String),

    /// Two artifacts that must share a feature basis do not.
    #[error("basis binding mismatch: expected fingerprint {expected:016x}, found {found:016x}")]
    Binding { expected: u64, found: u64 },

    /// Invalid argument (empty input lists and the like).
    #[error("argument error: {0}")]
    Argument(String),

    /// Malformed or truncated byte stream.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// Malformed text input (CSV, beam log, JSON layout).
    #[error("format error: {0}")]
    Format(String),

    #[error("index {index} out of bounds for {len} cells")]
    Index { index: usize, len: usize },

    /// A metric is not defined for the given input (e.g. AUC on one class).
    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            Error::Format(e.to_string())
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                other => Error::Format(format!("{other:?}")),
            }
        } else {
            Error::Format(e.to_string())
        }
    }
}

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
