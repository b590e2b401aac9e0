use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation precondition (dimensions, ranges, block sizes).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed or truncated container file.
    #[error("format error: {0}")]
    Format(String),

    /// Weights that parse but do not describe a usable model.
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("unsupported audio: {0}")]
    Audio(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Contract(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
