//! Error types shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by simulation construction and execution.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A spin system failed validation (bad Larmor frequency, nucleus count,
    /// duplicate labels, negative transverse coupling, ...).
    #[error("invalid spin system: {0}")]
    InvalidSystem(String),

    /// A protocol specification or pulse sequence failed validation.
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    /// A sweep schedule failed validation (sign mismatch, empty grid, ...).
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    /// A state or amplitude input failed validation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Operator or state dimensions do not match.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A numerical invariant (unitarity, trace preservation, orthonormality,
    /// positivity) was violated beyond tolerance. `context` carries the
    /// offending quantity and, where applicable, the tau value or step index.
    #[error("numerical invariant violated: {context}")]
    NumericalInvariant { context: String },

    /// The eigensolver failed to converge.
    #[error("eigensolver failed: {context}")]
    EigenFailure { context: String },
}

impl CoreError {
    /// Shorthand constructor for invariant violations.
    pub fn invariant(context: impl Into<String>) -> Self {
        CoreError::NumericalInvariant {
            context: context.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
