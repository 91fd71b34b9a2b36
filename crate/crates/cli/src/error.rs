use histosr_core::Error as CoreError;

/// Exit code for bad input, configuration or arguments.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code for failures while running a valid command.
pub const EXIT_RUNTIME: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Runtime(String),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Core(e) => match e {
                CoreError::InvalidParameter(_)
                | CoreError::DimensionMismatch(_)
                | CoreError::TooSmall(_)
                | CoreError::Empty(_)
                | CoreError::Degenerate(_)
                | CoreError::UnknownMetric(_)
                | CoreError::Csv { .. }
                | CoreError::Json { .. }
                | CoreError::UnsupportedFormat { .. }
                | CoreError::Invalid(_) => EXIT_VALIDATION,
                _ => EXIT_RUNTIME,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::runtime(format!("i/o error on {}: {e}", path.display()))
}
