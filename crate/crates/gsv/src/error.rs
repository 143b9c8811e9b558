//! Crate-wide error type with machine-readable categories.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported kernel operation: {0}")]
    UnsupportedKernel(String),

    #[error("covariance matrix not positive semidefinite after jitter up to {jitter_limit:e}")]
    NotPsd { jitter_limit: f64 },

    #[error("degenerate estimate: {0}")]
    DegenerateEstimate(String),

    #[error("operation requires regime {expected}, got {found}")]
    WrongRegime {
        expected: &'static str,
        found: String,
    },

    #[error("volatility function violates the linear growth condition required here")]
    GrowthViolation,

    #[error("rate function value is zero; implied volatility asymptote undefined")]
    ZeroRate,

    #[error("call price {price} outside the invertible range (0, 1)")]
    PriceOutOfRange { price: f64 },

    #[error("kernel family {0} is not self-similar")]
    NotSelfSimilar(&'static str),

    #[error("correlation rho = +/-1 is excluded from the variational solvers")]
    DegenerateCorrelation,

    #[error("gamma = {gamma} lies in [0, 1/(1-rho^2)] = [0, {limit}]; no split exists there")]
    InapplicableGamma { gamma: f64, limit: f64 },

    #[error("witness is not smooth enough for a convex minorant: {0}")]
    WitnessNotSmooth(String),

    #[error("volatility function has no declared growth witness: {0}")]
    Unclassified(String),

    #[error("variance of the integrated volatility process is not positive: {0}")]
    NonpositiveVariance(f64),

    #[error("config field `{field}` invalid: {reason}")]
    ConfigInvalid { field: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable category tag used in CLI reports and exit statuses.
    pub fn category(&self) -> &'static str {
        match self {
            Error::UnsupportedKernel(_) => "UNSUPPORTED_KERNEL",
            Error::NotPsd { .. } => "NOT_PSD",
            Error::DegenerateEstimate(_) => "DEGENERATE_ESTIMATE",
            Error::WrongRegime { .. } => "WRONG_REGIME",
            Error::GrowthViolation => "GROWTH_VIOLATION",
            Error::ZeroRate => "ZERO_RATE",
            Error::PriceOutOfRange { .. } => "PRICE_OUT_OF_RANGE",
            Error::NotSelfSimilar(_) => "NOT_SELF_SIMILAR",
            Error::DegenerateCorrelation => "DEGENERATE_CORRELATION",
            Error::InapplicableGamma { .. } => "INAPPLICABLE_GAMMA",
            Error::WitnessNotSmooth(_) => "WITNESS_NOT_SMOOTH",
            Error::Unclassified(_) => "UNCLASSIFIED",
            Error::NonpositiveVariance(_) => "NONPOSITIVE_VARIANCE",
            Error::ConfigInvalid { .. } => "CONFIG_INVALID",
            Error::InvalidInput(_) => "INVALID_INPUT",
            Error::Io(_) => "IO_ERROR",
            Error::Json(_) => "JSON_ERROR",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
