//! Local models, the bilinear estimator, singular series and sieve counts
//! for representations `N = p + n` with `p` prime in a progression and `n`
//! square-free.
//!
//! Global products and the estimator are generic over [`Scalar`]; the
//! aliases below fix the two scalar types used in practice: `f64` for
//! Λ-weighted experiments and [`BigRational`] for exact identity checks.

pub mod arith;
pub mod enumeration;
pub mod error;
pub mod estimator;
pub mod global;
pub mod local;
pub mod scalar;
pub mod series;
pub mod verify;

pub use arith::{FactoredInt, Rational, SieveTables};
pub use error::{Error, Result};
pub use local::{LocalModel, LocalVector, ProgressionContext, ScaledValue};
pub use num_rational::BigRational;
pub use scalar::Scalar;

pub type GlobalFn64 = global::GlobalFn<f64>;
pub type ExactGlobalFn = global::GlobalFn<BigRational>;
pub type LocalFn64 = global::LocalFn<f64>;
pub type ExactLocalFn = global::LocalFn<BigRational>;
pub type Estimator64<'m, 't> = estimator::Estimator<'m, 't, f64>;
pub type ExactEstimator<'m, 't> = estimator::Estimator<'m, 't, BigRational>;
pub type Weights64 = estimator::Weights<f64>;
pub type SeriesValue64 = series::SeriesValue<f64>;
