use std::fmt;

use mfg_core::MfgError;

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments. Exit code 1.
    Validation(String),
    /// Picard iteration stopped without meeting the tolerance. Exit code 2.
    NotConverged { iterations: usize, residual: f64 },
    /// The library refused or failed. Exit code 1.
    Library(MfgError),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged { .. } => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "invalid configuration: {msg}"),
            CliError::NotConverged {
                iterations,
                residual,
            } => write!(
                f,
                "fixed point not reached after {iterations} iterations (residual {residual:e}); trace written"
            ),
            CliError::Library(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<MfgError> for CliError {
    fn from(e: MfgError) -> Self {
        CliError::Library(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
