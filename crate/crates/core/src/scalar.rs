//! Scalar types the global products and the estimator are generic over.
//!
//! Exact types (`Rational`, `BigRational`) make bilinearity and Bessel-type
//! checks exact; float types carry the Λ-weighted experiments and always
//! reduce with compensated summation.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, Num, Signed, ToPrimitive};

use crate::arith::Rational;
use crate::local::ScaledValue;

pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + Send + Sync + 'static {
    /// True when arithmetic is exact.
    const EXACT: bool;

    fn from_rational(r: &Rational) -> Self;

    /// Exact types convert the binary value of the float exactly.
    fn from_f64(x: f64) -> Option<Self>;

    fn to_f64(&self) -> f64;

    /// Sums in iteration order; float implementations are compensated.
    fn sum_iter<I: IntoIterator<Item = Self>>(iter: I) -> Self;

    /// Converts `coeff * (6/π²)^k`. Exact types only accept `k = 0`.
    fn from_scaled(v: &ScaledValue) -> Option<Self> {
        if v.pi_power() == 0 || v.coeff() == &Rational::from_integer(0) {
            Some(Self::from_rational(v.coeff()))
        } else if Self::EXACT {
            None
        } else {
            Self::from_f64(v.to_f64())
        }
    }

    fn from_i64(n: i64) -> Self {
        Self::from_rational(&Rational::from_integer(n as i128))
    }
}

fn rational_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial sum in; used for ordered window reductions.
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Exact sum of non-negative floats on a fixed grid of `2^-64`.
///
/// Any `x >= 2^-11` is a multiple of the grid, so the sum is exact and
/// independent of grouping; `value` rounds it once. Holds `2^40` terms
/// below `2^23`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FixedPointSum {
    units: i128,
}

const FIXED_SCALE: f64 = 18446744073709551616.0; // 2^64

impl FixedPointSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        debug_assert!((0.0..8_388_608.0).contains(&x));
        self.units += (x * FIXED_SCALE).round() as i128;
    }

    pub fn merge(&mut self, other: &FixedPointSum) {
        self.units += other.units;
    }

    pub fn value(&self) -> f64 {
        self.units as f64 / FIXED_SCALE
    }
}

pub(crate) fn neumaier<F: Float, I: IntoIterator<Item = F>>(iter: I) -> F {
    let mut sum = F::zero();
    let mut c = F::zero();
    for x in iter {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c = c + ((sum - t) + x);
        } else {
            c = c + ((x - t) + sum);
        }
        sum = t;
    }
    sum + c
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }

    fn from_f64(x: f64) -> Option<Self> {
        Some(x)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn sum_iter<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        neumaier(iter)
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r) as f32
    }

    fn from_f64(x: f64) -> Option<Self> {
        Some(x as f32)
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }

    fn sum_iter<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        neumaier(iter)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_rational(r: &Rational) -> Self {
        *r
    }

    fn from_f64(x: f64) -> Option<Self> {
        Rational::approximate_float(x).filter(|r| rational_to_f64(r) == x)
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn sum_iter<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        iter.into_iter()
            .fold(Rational::from_integer(0), |a, b| a + b)
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_rational(r: &Rational) -> Self {
        BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
    }

    fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn sum_iter<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        iter.into_iter()
            .fold(BigRational::from_integer(BigInt::from(0)), |a, b| a + b)
    }
}
