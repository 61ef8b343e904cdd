use thiserror::Error;

/// Errors shared by every layer of the crate.
#[derive(Debug, Error)]
pub enum TdrError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A moment of total order `needed` was requested from a provider that
    /// only covers orders up to `max`.
    #[error("unsupported moment order {needed} (provider covers up to {max})")]
    UnsupportedOrder { needed: usize, max: usize },

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    /// A simulated state left the finite range at time step `step`.
    #[error("state diverged at step {step}")]
    Divergence { step: usize },

    #[error("unstable configuration: {0}")]
    Instability(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, TdrError>;
