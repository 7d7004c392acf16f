use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("horizon of {horizon} hypotheses exhausted at index {index}; rebound to continue")]
    HorizonExhausted { index: usize, horizon: usize },
    #[error("invalid horizon: {0}")]
    Horizon(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
