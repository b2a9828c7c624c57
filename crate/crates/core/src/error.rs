use thiserror::Error;

/// Errors raised by parameter validation, sampling and file handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A weight that must be a probability exceeds 1.
    #[error("theta level {level} entry ({row},{col}) = {value} exceeds 1")]
    Validity {
        level: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("size limit exceeded: {0}")]
    Size(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
