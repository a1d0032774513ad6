use thiserror::Error;

/// Errors raised by the arithmetic, local-model, series and sieve layers.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("sieve limit must be at least 2, got {0}")]
    SieveLimitTooSmall(u64),
    #[error("sieve limit {0} exceeds the supported cap {1}")]
    SieveLimitTooLarge(u64, u64),
    #[error("cannot factor {value}: cofactor {cofactor} exceeds limit^2 of the sieve")]
    Unfactored { value: u64, cofactor: u64 },
    #[error("{0} is not cubefree")]
    NotCubefree(u64),
    #[error("residue {a} is not coprime to modulus {q}")]
    NotCoprime { a: i64, q: u64 },
    #[error("{d} does not divide {a}")]
    NotADivisor { d: u64, a: u64 },
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u64, u64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("cannot add values scaled by (6/pi^2)^{0} and (6/pi^2)^{1}")]
    PiPowerMismatch(i32, i32),
    #[error("value with (6/pi^2)^{0} is not representable in the requested scalar type")]
    NotRepresentable(i32),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
