use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
    /// An artifact that no longer matches its manifest.
    #[error("corrupt fit directory: {0}")]
    Corrupt(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("i/o error on {}: {e}", path.display()))
    }

    /// 2 validation, 3 numerical failure, 4 i/o or corrupt input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) | CliError::Corrupt(_) => 4,
        }
    }
}

impl From<lgrowth::Error> for CliError {
    fn from(e: lgrowth::Error) -> Self {
        use lgrowth::Error as E;
        let msg = e.to_string();
        match e {
            E::Numerical { .. } => CliError::Numerical(msg),
            E::Io { .. } => CliError::Io(msg),
            E::Csv(ref c) if c.is_io_error() => CliError::Io(msg),
            E::Validation(_) | E::Parse { .. } | E::Csv(_) | E::Json(_) => CliError::Validation(msg),
        }
    }
}
