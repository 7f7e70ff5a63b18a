//! Crate-wide error type.

use thiserror::Error;

/// Everything in this crate that can fail returns this error.
#[derive(Debug, Error)]
pub enum Error {
    /// A catalog identifier that the function registry does not know.
    #[error("unknown catalog function `{0}`")]
    UnknownCatalog(String),

    /// A structurally valid but semantically unusable parameter.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Mismatched dimensions between two inputs (field vs. grid, point vs. field, ...).
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Difference order too large for exact integer binomial coefficients.
    #[error("difference order {0} exceeds the exact-binomial limit of 62")]
    OrderTooLarge(u32),

    /// A derivative of higher order than the catalog entry provides.
    #[error("derivative order {requested} unavailable for `{id}` (max {available})")]
    DerivativeUnavailable {
        id: String,
        requested: usize,
        available: usize,
    },

    /// A norm bisection whose bracket never closed (degenerate modular).
    #[error("bisection failed: {0}")]
    BisectionFailure(String),

    /// Two quadrature resolutions disagree beyond the allowed tolerance.
    #[error("quadrature consistency failure: {0}")]
    QuadratureInconsistency(String),

    /// The λ-scan argmax sits on the grid boundary while still trending.
    #[error("λ-scan argmax on the grid boundary at λ = {lambda:.6e} (still trending); widen the λ-grid")]
    BoundaryArgmax { lambda: f64 },

    /// A limiting sequence without a usable monotone tail.
    #[error("non-convergent tail: {0}")]
    NonConvergentTail(String),

    /// Scenario configuration errors (unknown keys, invalid ranges, bad γ, ...).
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A numerical precondition that callers must guarantee.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Linear solve failure in a minimizing-polynomial Gram system.
    #[error("singular Gram system: {0}")]
    SingularSystem(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    TomlParse(#[from] toml::de::Error),

    #[error("report serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
