use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataprepError {
    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{file} line {line}: {msg}")]
    Parse { file: String, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataprepError>;

pub(crate) fn data_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(DataprepError::Data(msg.into()))
}

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(DataprepError::Config(msg.into()))
}
