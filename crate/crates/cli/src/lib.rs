//! Scenario runner for the spin-register simulation core: configuration
//! ingestion with strict validation, deterministic CSV/SVG/manifest
//! emission, and five built-in presets reproducing the library's reference
//! experiments.

pub mod csv_out;
pub mod manifest;
pub mod plot;
pub mod presets;
pub mod runner;
pub mod scenario;

use adpulse_core::CoreError;
use thiserror::Error;

/// CLI-level errors, classified by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad scenario file, bad key, bad value, or a physics-level input the
    /// core rejected. Exit code 2.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical invariant (unitarity, trace, orthonormality, positivity)
    /// was violated during the run. Exit code 3.
    #[error("numerical invariant violated: {0}")]
    Numerical(String),

    /// Filesystem or serialization failure. Exit code 1.
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    /// Prefix the message with scenario context.
    pub fn with_context(self, context: &str) -> CliError {
        match self {
            CliError::Config(m) => CliError::Config(format!("{context}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{context}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{context}: {m}")),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NumericalInvariant { .. } | CoreError::EigenFailure { .. } => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CliError>;
