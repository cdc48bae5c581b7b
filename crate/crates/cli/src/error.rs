use std::fmt;

use sli::SliError;

/// Failure of a command, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration or input files. Exit status 2.
    Usage(String),
    /// Failure while computing or writing results. Exit status 1.
    Compute(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn compute(msg: impl Into<String>) -> Self {
        CliError::Compute(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Compute(m) => f.write_str(m),
        }
    }
}

impl From<SliError> for CliError {
    fn from(e: SliError) -> Self {
        CliError::Compute(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags validation failures of configured values as usage errors.
pub fn invalid(context: &str) -> impl FnOnce(SliError) -> CliError + '_ {
    move |e| CliError::Usage(format!("{context}: {e}"))
}
