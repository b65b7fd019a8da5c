//! Error type shared by every module.

use thiserror::Error;

/// Library-wide error enumeration.
///
/// Variants map onto the CLI exit-code contract: precondition violations
/// (invalid discriminants, congruence or level violations, even arguments)
/// exit 3; resource ceilings, non-convergence and precision failures exit 4;
/// verification failures exit 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid discriminant {0}: must be negative and = 0, 1 (mod 4)")]
    InvalidDiscriminant(i64),

    #[error("invalid congruence: {0}")]
    InvalidCongruence(String),

    #[error("invalid level c = {0}: must be divisible by 4")]
    InvalidLevel(u64),

    #[error("argument {0} must be odd")]
    EvenArgument(i64),

    #[error("precision failure: {0}")]
    PrecisionFailure(String),

    #[error("series did not converge: cutoff {cutoff} reached with last increment {last_delta:e}")]
    NonConvergence {
        cutoff: u64,
        last_delta: f64,
        /// Decimal rendering of the partial value at the ceiling, so callers
        /// can still inspect what was reached.
        partial: String,
    },

    #[error("resource ceiling exceeded: {what} needs {needed}, ceiling {ceiling}")]
    ResourceCeiling {
        what: &'static str,
        needed: u64,
        ceiling: u64,
    },

    #[error("representative search exhausted: {0}")]
    SearchExhausted(String),

    #[error("exact-identity assertion failed: {0}")]
    AssertionFailure(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
