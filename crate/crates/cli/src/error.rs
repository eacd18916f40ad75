use std::fmt;

use diffusion_emd::Error;

/// A failed command together with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Numerical(String),
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::CheckFailed(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::CheckFailed(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let text = err.to_string();
        match err {
            Error::InvalidParameter(_) | Error::Unsupported(_) => CliError::Usage(text),
            Error::InvalidInput(_) | Error::Parse { .. } | Error::Io(_) => CliError::Input(text),
            Error::DegenerateNode { .. }
            | Error::Numerical { .. }
            | Error::InvalidState(_)
            | Error::UndefinedCorrelation(_) => CliError::Numerical(text),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_context(path: &std::path::Path, err: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {err}", path.display()))
}
