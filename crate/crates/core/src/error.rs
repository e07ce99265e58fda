use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range for {len} players")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("format error in {source_name}: {message}")]
    Format { source_name: String, message: String },

    /// An iterative routine hit its cap; `estimate` is the last iterate.
    #[error("numeric failure: {message} (best estimate {estimate})")]
    NumericFailure { message: String, estimate: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn format(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            source_name: source_name.into(),
            message: message.into(),
        }
    }

    pub(crate) fn numeric(message: impl Into<String>, estimate: f64) -> Self {
        Error::NumericFailure {
            message: message.into(),
            estimate,
        }
    }
}
