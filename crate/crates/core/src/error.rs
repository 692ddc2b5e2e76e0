use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The projection for input `label` succeeds with probability at or below threshold.
    #[error("impossible preparation for input {label}: success probability {probability:e}")]
    ImpossiblePreparation { label: usize, probability: f64 },

    #[error("degenerate tomography basis: smallest singular value {smallest_singular_value:e}")]
    DegenerateBasis { smallest_singular_value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
