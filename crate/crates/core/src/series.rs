//! The singular series `𝔖_{a,q}(N)` in its Ramanujan-sum (Euler product)
//! form and in the case-split form, with a truncation bound.
//!
//! Both forms write `𝔖 = 6/(φ(q)π²) · F_N · F_q · T(P)` where `F_N` and `F_q`
//! are finite products over `p | N` and `p | q` (exact, since `N` and `q`
//! arrive factored) and `T(P) = ∏_{p ≤ P, p ∤ Nq} (1 - 1/((p²-1)(p-1)))` is
//! the only truncated part. Products are accumulated as compensated sums of
//! `ln_1p` terms over fixed prime blocks.

use num_traits::{CheckedMul, Float};
use rayon::prelude::*;

use crate::arith::{euler_phi, gcd, ramanujan_sum, residue, FactoredInt, Rational, SieveTables};
use crate::error::{Error, Result};
use crate::scalar::neumaier;

/// Default prime cutoff.
pub const DEFAULT_PRIME_CUTOFF: u64 = 1_000_000;

const BLOCK: usize = 1 << 14;

/// A singular-series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue<F> {
    pub value: F,
    /// Relative truncation bound: the infinite product lies in
    /// `[value (1 - tail_bound), value]`.
    pub tail_bound: F,
    pub vanished: bool,
    pub prime_cutoff: u64,
}

impl<F: Float> SeriesValue<F> {
    /// `[value (1 - tail), value (1 + tail)]`.
    pub fn interval(&self) -> (F, F) {
        (
            self.value * (F::one() - self.tail_bound),
            self.value * (F::one() + self.tail_bound),
        )
    }

    pub fn contains(&self, x: F) -> bool {
        let (lo, hi) = self.interval();
        lo <= x && x <= hi
    }
}

/// `2/P²`: for `p > P >= 2`, `1/((p²-1)(p-1)) <= 2/p³` and
/// `Σ_{n > P} 2/n³ < 1/P²`; the extra factor 2 absorbs rounding.
pub fn tail_bound<F: Float>(p_cutoff: u64) -> F {
    let p = F::from(p_cutoff).unwrap();
    F::from(2.0).unwrap() / (p * p)
}

fn cast<F: Float>(x: f64) -> F {
    F::from(x).unwrap()
}

fn check_inputs(a: i64, q: &FactoredInt, p_cutoff: u64, tables: &SieveTables) -> Result<()> {
    if gcd(residue(a, q.value()), q.value()) != 1 {
        return Err(Error::NotCoprime { a, q: q.value() });
    }
    if p_cutoff < 2 {
        return Err(Error::InvalidArgument(format!(
            "prime cutoff {p_cutoff} < 2"
        )));
    }
    if p_cutoff > tables.limit() {
        return Err(Error::Capacity(format!(
            "prime cutoff {p_cutoff} exceeds the sieve limit {}",
            tables.limit()
        )));
    }
    Ok(())
}

/// `Σ ln(1 + term(p))` over primes with `keep(p)` true, summed per
/// block and reduced in block order.
fn log_product<F, T, K>(primes: &[u32], keep: K, term: T) -> F
where
    F: Float + Send + Sync,
    T: Fn(u64) -> F + Sync,
    K: Fn(u64) -> bool + Sync,
{
    let blocks: Vec<F> = primes
        .par_chunks(BLOCK)
        .map(|chunk| {
            neumaier(
                chunk
                    .iter()
                    .map(|&p| p as u64)
                    .filter(|&p| keep(p))
                    .map(|p| term(p).ln_1p()),
            )
        })
        .collect();
    neumaier(blocks)
}

fn base<F: Float>(q: &FactoredInt) -> F {
    let six_over_pi2 = cast::<F>(6.0) / (F::from(std::f64::consts::PI).unwrap().powi(2));
    six_over_pi2 / F::from(euler_phi(q)).unwrap()
}

fn prime(p: u64) -> FactoredInt {
    FactoredInt::from_factors(vec![(p, 1)]).expect("prime")
}

fn prime_square(p: u64) -> FactoredInt {
    FactoredInt::from_factors(vec![(p, 2)]).expect("prime square")
}

fn n_minus_a(n: &FactoredInt, a: i64) -> i64 {
    n.value() as i64 - a
}

/// True iff some `p²` divides `(q, N - a)`.
pub fn is_obstructed(n: &FactoredInt, a: i64, q: &FactoredInt) -> bool {
    let shift = n_minus_a(n, a).unsigned_abs();
    q.factors()
        .iter()
        .any(|&(p, e)| e >= 2 && shift % (p * p) == 0)
}

/// The case-split form: indicator, `p | N` and `p | q` corrections, and the
/// truncated product over `p ∤ Nq`.
pub fn singular_series<F: Float + Send + Sync>(
    n: &FactoredInt,
    a: i64,
    q: &FactoredInt,
    p_cutoff: u64,
    tables: &SieveTables,
) -> Result<SeriesValue<F>> {
    check_inputs(a, q, p_cutoff, tables)?;
    let tail = tail_bound(p_cutoff);
    if is_obstructed(n, a, q) {
        return Ok(SeriesValue {
            value: F::zero(),
            tail_bound: tail,
            vanished: true,
            prime_cutoff: p_cutoff,
        });
    }
    let shift = n_minus_a(n, a).unsigned_abs();
    let one = F::one();
    let mut logs = Vec::new();
    for p in n.primes().filter(|&p| q.exponent_of(p) == 0) {
        let pf = F::from(p).unwrap();
        logs.push((one / (pf * pf - one)).ln_1p());
    }
    for &(p, e) in q.factors() {
        let pf = F::from(p).unwrap();
        let factor = if e == 1 && shift % p == 0 {
            -one / (pf + one)
        } else {
            one / (pf * pf - one)
        };
        logs.push(factor.ln_1p());
    }
    let nq = n.value() as u128 * q.value() as u128;
    let truncated = log_product(
        tables.primes_up_to(p_cutoff),
        |p| nq % p as u128 != 0,
        |p| {
            let pf = F::from(p).unwrap();
            -one / ((pf * pf - one) * (pf - one))
        },
    );
    logs.push(truncated);
    Ok(SeriesValue {
        value: base::<F>(q) * neumaier(logs).exp(),
        tail_bound: tail,
        vanished: false,
        prime_cutoff: p_cutoff,
    })
}

/// The Ramanujan-sum form
/// `6/(φ(q)π²) ∏_{p ∤ q} (1 + c_p(N)/((p²-1)(p-1))) ∏_{p ∥ q} (1 - c_p(N-a)/(p²-1))
/// ∏_{p² | q} (1 - (c_p(N-a) + c_{p²}(N-a))/(p²-1))`.
///
/// The factors for `p | N` beyond the cutoff are taken from the
/// factorization of `N`, so truncation only drops factors below one.
pub fn singular_series_eulerform<F: Float + Send + Sync>(
    n: &FactoredInt,
    a: i64,
    q: &FactoredInt,
    p_cutoff: u64,
    tables: &SieveTables,
) -> Result<SeriesValue<F>> {
    check_inputs(a, q, p_cutoff, tables)?;
    let tail = tail_bound(p_cutoff);
    let shift = n_minus_a(n, a);
    let nv = n.value() as i64;
    let one = F::one();
    let mut logs = Vec::new();
    let mut vanished = false;
    for &(p, e) in q.factors() {
        let pf = F::from(p).unwrap();
        let num = if e == 1 {
            ramanujan_sum(&prime(p), shift)
        } else {
            ramanujan_sum(&prime(p), shift) + ramanujan_sum(&prime_square(p), shift)
        };
        let denom = (p * p - 1) as i64;
        if num == denom {
            vanished = true;
            break;
        }
        logs.push((-F::from(num).unwrap() / (pf * pf - one)).ln_1p());
    }
    if vanished {
        return Ok(SeriesValue {
            value: F::zero(),
            tail_bound: tail,
            vanished: true,
            prime_cutoff: p_cutoff,
        });
    }
    let euler_term = |p: u64| {
        let pf = F::from(p).unwrap();
        F::from(ramanujan_sum(&prime(p), nv)).unwrap() / ((pf * pf - one) * (pf - one))
    };
    logs.push(log_product(
        tables.primes_up_to(p_cutoff),
        |p| q.value() % p != 0,
        euler_term,
    ));
    for p in n
        .primes()
        .filter(|&p| p > p_cutoff && q.exponent_of(p) == 0)
    {
        logs.push(euler_term(p).ln_1p());
    }
    Ok(SeriesValue {
        value: base::<F>(q) * neumaier(logs).exp(),
        tail_bound: tail,
        vanished: false,
        prime_cutoff: p_cutoff,
    })
}

/// The floor `(1/φ(q')) ∏_{p <= q'} (1 - 1/(p+1))`.
pub fn series_lower_bound(q_prime: u64, tables: &SieveTables) -> Result<Rational> {
    if q_prime == 0 {
        return Err(Error::InvalidArgument("q' = 0".into()));
    }
    let phi = euler_phi(&tables.factorize(q_prime)?) as i128;
    let mut acc = Rational::new(1, phi);
    for &p in tables.primes_up_to(q_prime) {
        let p = p as i128;
        acc = acc
            .checked_mul(&Rational::new(p, p + 1))
            .ok_or_else(|| Error::Capacity(format!("series floor for q' = {q_prime}")))?;
    }
    Ok(acc)
}
