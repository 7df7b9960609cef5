use thiserror::Error;

/// Errors reported by the arithmetic, planning and transform layers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{value} has no inverse modulo {modulus}")]
    NoInverse { value: u64, modulus: u64 },

    #[error("modulus mismatch: {left} vs {right}")]
    ContextMismatch { left: u64, right: u64 },

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("operands belong to different extension fields")]
    FieldMismatch,

    #[error("{0} does not divide the order of the multiplicative group")]
    NotDivisor(String),

    #[error("search exhausted: {0}")]
    SearchExhausted(String),

    #[error("root of unity check failed: {0}")]
    BadRoot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
