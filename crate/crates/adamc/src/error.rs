//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by parameter validation, sampling, and the quadrature
/// oracle.
#[derive(Debug, Error)]
pub enum Error {
    /// A natural parameter was rejected by its family's validity check.
    #[error("invalid natural parameter: {reason}")]
    InvalidParameter { reason: String },

    /// An input had the wrong length for the operation.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// Parameter blocks do not line up with the structure they are used with
    /// (e.g. a vector block paired with a spectral constraint).
    #[error("block structure mismatch in {context}")]
    StructureMismatch { context: &'static str },

    /// A log-density or gradient evaluated to NaN/∞ where a finite value is
    /// required. Carries a diagnostic of where it happened.
    #[error("non-finite value in {context}: {details}")]
    NonFinite { context: &'static str, details: String },

    /// A quadrature grid failed its coverage check: the probability mass
    /// outside the integration rectangle is not negligible.
    #[error("quadrature grid coverage check failed: missing mass {missing:.3e} exceeds {budget:.1e}")]
    GridCoverage { missing: f64, budget: f64 },

    /// A problem or run configuration was rejected.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
