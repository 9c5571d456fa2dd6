use std::fmt;

use shapx_core::ShapError;

/// Failure of a command, split by exit code: 2 for bad input, 1 otherwise.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Internal(String),
    Core(ShapError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
            CliError::Core(e) => match e {
                ShapError::Argument(_)
                | ShapError::Config(_)
                | ShapError::Capacity(_)
                | ShapError::Data(_)
                | ShapError::Format(_)
                | ShapError::Io { .. } => 2,
                ShapError::Domain(_) | ShapError::Solver(_) | ShapError::Training(_) => 1,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<ShapError> for CliError {
    fn from(e: ShapError) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
