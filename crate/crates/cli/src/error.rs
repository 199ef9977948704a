use std::fmt;

/// Failures of a command, each with a process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag values. Exit code 1.
    Usage(String),
    /// Errors from the library. Numerical problems exit with 3, everything
    /// else with 2.
    Core(fairlink::Error),
    /// A gradient check exceeded its tolerance. Exit code 3.
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Core(fairlink::Error::Numerical(_) | fairlink::Error::UndefinedMetric(_)) => 3,
            Self::Core(_) => 2,
            Self::CheckFailed(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Core(e) => write!(f, "{e}"),
            Self::CheckFailed(m) => write!(f, "gradient check failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fairlink::Error> for CliError {
    fn from(e: fairlink::Error) -> Self {
        Self::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
