use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{op} needs at least {min} values, got {got}")]
    Arity { op: &'static str, min: usize, got: usize },

    #[error("CIDEr needs a corpus of at least 2 items for document frequencies, got {0}; score a larger corpus or report BLEU/ROUGE-L instead")]
    DegenerateIdf(usize),

    #[error("kappa is undefined: {0}")]
    UndefinedKappa(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(MetricsError::Invalid(msg.into()))
}
