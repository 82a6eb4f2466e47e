//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong between reading samples and printing an
/// estimate. Variants are grouped by where they originate so the CLI can
/// map them onto exit codes without string matching.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller handed us something unusable: mismatched lengths, points
    /// outside the domain, malformed CSV, an empty schedule.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The kernel matrix was not numerically positive definite. Carries the
    /// offending pivot so the caller can judge how close to singular it was.
    #[error(
        "kernel matrix factorization failed at row {index} (pivot {pivot:.3e}); \
         points may be too close together, consider jitter or fewer levels"
    )]
    Factorization { index: usize, pivot: f64 },

    /// Not enough trace levels (or surviving fit pairs) for the requested
    /// algorithm. The message says which stage ran short.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The increment sequence shows no decay (fitted rate <= 0), so the
    /// geometric tail sum diverges and no upper bound exists.
    #[error("increment norms show no decay (fitted rate {beta:.4}); tail sum diverges")]
    NoDecay { beta: f64 },

    /// The membership test classified the sampled function as lying outside
    /// the native space, so a certificate would be meaningless.
    #[error("interpolant norms are diverging; the function does not appear to lie in the native space")]
    Diverging,

    /// A certificate was requested with a constant below the interpolant
    /// norm, which the bound derivation does not permit.
    #[error("bound constant {constant:.6} is below the interpolant norm {norm:.6}")]
    BoundBelowNorm { constant: f64, norm: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization failed: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
