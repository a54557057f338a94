use thiserror::Error;

/// Errors raised by the arithmetic and experiment layers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("characteristic {0} is even; only odd prime powers are supported")]
    EvenCharacteristic(u64),
    #[error("polynomial {0} is not irreducible")]
    NotIrreducible(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("operands belong to different fields")]
    ContextMismatch,
    #[error("{0} is not invertible modulo {1}")]
    NotInvertible(String, String),
    #[error("operation undefined for the zero polynomial")]
    ZeroPolynomial,
    #[error("operation undefined for a constant polynomial")]
    ConstantPolynomial,
    #[error("{0} and {1} are not coprime")]
    NotCoprime(String, String),
    #[error("cutoff U={u} is invalid for n={n}: need 1 <= U and 2U < n")]
    BadCutoff { u: usize, n: usize },
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
