use ldp_autodiff::AutodiffError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LdpError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("text of length {len} exceeds max_text_len {max}")]
    Length { len: usize, max: usize },

    #[error("LoRA adapters are already injected")]
    AlreadyInjected,

    #[error("state error: {0}")]
    State(String),

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error(transparent)]
    Autodiff(#[from] AutodiffError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LdpError {
    /// True for failures that originate in numeric evaluation (non-finite values, degenerate losses).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            LdpError::Autodiff(AutodiffError::NonFinite { .. } | AutodiffError::DegenerateBatch)
        )
    }
}

pub type Result<T> = std::result::Result<T, LdpError>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(LdpError::Config(msg.into()))
}
