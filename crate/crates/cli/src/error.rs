use thiserror::Error;

use pdetect::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    /// 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Core(e) => match e {
                CoreError::InvalidArgument(_) => 2,
                CoreError::Parse { .. } | CoreError::Data(_) | CoreError::Io(_) | CoreError::UndefinedCorrelation(_) => 3,
                CoreError::ConstraintViolation { .. }
                | CoreError::NoUsableAntenna { .. }
                | CoreError::NonConvergence { .. }
                | CoreError::OutOfRange { .. } => 4,
            },
        }
    }
}
