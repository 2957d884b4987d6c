use thiserror::Error;

/// CLI failure, classified by exit status.
#[derive(Error, Debug)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Data(#[from] flowguard::Error),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn internal(context: &str, err: impl std::fmt::Display) -> Self {
        CliError::Internal(format!("{context}: {err}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
