use thiserror::Error;

/// Errors raised by the simulation and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {field}: {message}")]
    Validation { field: &'static str, message: String },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("walker {walker} (master seed {seed}) did not reach a turnaround marker within {max_steps} steps")]
    NonTerminating {
        seed: u64,
        walker: u64,
        max_steps: u64,
    },

    #[error("exhaustive enumeration up to t_max={t_max} would visit about {estimated_branches} branches (limit t_max={limit})")]
    EnumerationTooLarge {
        t_max: usize,
        limit: usize,
        estimated_branches: f64,
    },

    #[error("field is already renormalized")]
    AlreadyRenormalized,

    #[error("operation requires {expected} scaling")]
    WrongScaling { expected: &'static str },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, message: impl Into<String>) -> Error {
    Error::Validation {
        field,
        message: message.into(),
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, actual })
    }
}
