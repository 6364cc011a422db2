use ldp_core::LdpError;
use ldp_dataprep::DataprepError;
use ldp_metrics::MetricsError;
use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
    Internal,
}

impl ErrorClass {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numeric => 4,
            ErrorClass::Internal => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },

    #[error("invalid config file: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Core(#[from] LdpError),

    #[error(transparent)]
    Metrics(#[from] MetricsError),

    #[error(transparent)]
    Prep(#[from] DataprepError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn class(&self) -> ErrorClass {
        match self {
            CliError::Config(_) | CliError::Toml(_) => ErrorClass::Config,
            CliError::Data(_) | CliError::File { .. } => ErrorClass::Data,
            CliError::Core(e) if e.is_numeric() => ErrorClass::Numeric,
            CliError::Core(LdpError::Config(_) | LdpError::AlreadyInjected) => ErrorClass::Config,
            CliError::Core(LdpError::Io(_)) => ErrorClass::Data,
            CliError::Core(
                LdpError::Data(_) | LdpError::Length { .. } | LdpError::Shape(_) | LdpError::Format(_),
            ) => ErrorClass::Data,
            CliError::Core(_) => ErrorClass::Internal,
            CliError::Metrics(MetricsError::UndefinedKappa(_) | MetricsError::DegenerateIdf(_)) => {
                ErrorClass::Numeric
            }
            CliError::Metrics(_) => ErrorClass::Data,
            CliError::Prep(DataprepError::Config(_)) => ErrorClass::Config,
            CliError::Prep(_) => ErrorClass::Data,
            CliError::Io(_) => ErrorClass::Internal,
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.class().exit_code()
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Config(msg.into()))
}

pub(crate) fn data_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Data(msg.into()))
}

/// Reads a file, naming it in the error.
pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::File { path: path.display().to_string(), source })
}
