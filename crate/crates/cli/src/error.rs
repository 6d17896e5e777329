use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    NotConverged(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::NotConverged(_) => 3,
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn config(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Config(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Io(m) => write!(f, "I/O: {m}"),
            CliError::NotConverged(m) => write!(f, "not converged: {m}"),
        }
    }
}
