use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or domain object failed validation.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// An arm index outside `[0, num_arms)` was supplied.
    #[error("arm index {arm} out of range for {num_arms} arms")]
    ArmOutOfRange { arm: usize, num_arms: usize },

    /// A reward that must be finite was NaN or infinite.
    #[error("non-finite reward {0}")]
    NonFiniteReward(f64),

    /// A matrix that must be symmetric positive definite was not.
    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    /// Two objects that must share a dimension did not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An operation's stated precondition does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Correlated imaginary priors are unsupported for this quantity.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
