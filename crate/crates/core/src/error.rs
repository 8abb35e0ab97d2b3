use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("domain size mismatch: {left} vs {right}")]
    DomainMismatch { left: usize, right: usize },

    #[error("symbol {symbol} outside domain [1, {n}]")]
    SymbolOutOfRange { symbol: usize, n: usize },

    #[error("expected {expected} samples, got {actual}")]
    SampleCountMismatch { expected: usize, actual: usize },

    #[error("ratio undefined: reference Poisson has zero mass at x = {x}")]
    ZeroDenominator { x: u64 },

    #[error("stream exhausted after {got} of {needed} samples")]
    StreamExhausted { needed: u64, got: u64 },

    #[error("instance too large: {size} exceeds limit {limit}")]
    TooLarge { size: f64, limit: f64 },

    #[error("distributions coincide; distance is zero")]
    ZeroDistance,

    #[error("structural guarantee violated: {0}")]
    Violation(String),

    #[error("tracker has terminated; no further input accepted")]
    TrackerFinished,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
