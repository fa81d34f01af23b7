use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Rejected input; exit code 2.
    #[error("{0}")]
    BadInput(String),
    /// A check failed or a computation did not complete; exit code 1.
    #[error("{0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::BadInput(_) | CliError::Io(_) => 2,
            CliError::Validation(_) => 1,
        }
    }
}

impl From<cavity_ness::Error> for CliError {
    fn from(e: cavity_ness::Error) -> Self {
        match e {
            cavity_ness::Error::InvalidParameter { .. } | cavity_ness::Error::DimensionMismatch { .. } => {
                CliError::BadInput(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
