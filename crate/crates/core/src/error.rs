use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{what}: expected length {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("cross-range {x_m} m is outside the small-angle regime (|x| < {limit_m} m)")]
    OutsideApproximation { x_m: f64, limit_m: f64 },

    #[error("pilot at subcarrier {subcarrier} is unreliable (|H| = {magnitude:e}, median {median:e})")]
    UnreliablePilot {
        subcarrier: usize,
        magnitude: f64,
        median: f64,
    },

    #[error("non-finite LLR at position {0}")]
    NonFiniteLlr(usize),

    #[error("found {found} local maxima, expected at least {expected}")]
    NotEnoughPeaks { found: usize, expected: usize },
}
