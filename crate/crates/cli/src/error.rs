use std::fmt;
use std::path::{Path, PathBuf};

/// Process exit codes.
pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_MAX_ITER: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Io { path: PathBuf, source: std::io::Error },
    Core(jtiv::Error),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_IO,
            CliError::Core(e) if e.is_io() => EXIT_IO,
            _ => EXIT_INVALID,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(msg) => write!(f, "invalid input: {msg}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Core(e) if e.is_io() => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "invalid input: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<jtiv::Error> for CliError {
    fn from(e: jtiv::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
