use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] koo_core::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 = validation error, 3 = numerical failure, 4 = io error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(koo_core::Error::Singular(_)) => 3,
            CliError::Core(_) | CliError::Parse(_) | CliError::Data(_) => 2,
            CliError::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
