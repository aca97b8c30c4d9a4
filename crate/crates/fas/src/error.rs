use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("degenerate constraint: expert {expert} has near-zero weight sum {sum:e}")]
    DegenerateConstraint { expert: usize, sum: f64 },

    #[error("training diverged (non-finite value) at update {update}")]
    Diverged { update: usize },

    #[error("component {component} value {value} is not on the quantization lattice")]
    OffLattice { component: usize, value: f64 },

    #[error("state space too large: {states} states exceeds the enumeration limit {limit}")]
    CapacityExceeded { states: u128, limit: u64 },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("archive error: {0}")]
    Archive(String),
}

pub type Result<T> = std::result::Result<T, Error>;
