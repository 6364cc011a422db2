use thiserror::Error;

/// Errors raised by tensor construction, recorded operations and backward.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("dimension error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("token id {id} is outside the vocabulary of size {vocab}")]
    Vocabulary { id: usize, vocab: usize },

    #[error("every position of the batch is ignored; loss is undefined")]
    DegenerateBatch,

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, AutodiffError>;

pub(crate) fn shape_err<T>(op: &'static str, detail: impl Into<String>) -> Result<T> {
    Err(AutodiffError::Shape {
        op,
        detail: detail.into(),
    })
}
