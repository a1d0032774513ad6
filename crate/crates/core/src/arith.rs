//! Sieve tables, factorization and the elementary multiplicative functions.
//!
//! Everything downstream (local models, singular series, counting) goes
//! through [`SieveTables::factorize`], so this is the single factorization
//! authority of the crate. Tables are immutable once built and can be shared
//! across threads.

use bitvec::prelude::*;
use num_integer::Integer;

use crate::error::{Error, Result};

/// Exact rationals, always kept in lowest terms with a positive denominator.
pub type Rational = num_rational::Ratio<i128>;

/// Largest limit accepted by [`SieveTables::build`]. Memory use is roughly
/// six bytes per integer, so 10^8 needs about 600 MB.
pub const MAX_SIEVE_LIMIT: u64 = u32::MAX as u64;

/// Smallest prime factor, Möbius and square-free tables over `[1, limit]`.
#[derive(Debug, Clone)]
pub struct SieveTables {
    limit: u64,
    spf: Vec<u32>,
    mobius: Vec<i8>,
    squarefree: BitVec,
    primes: Vec<u32>,
}

impl SieveTables {
    /// Linear sieve up to `limit` (inclusive).
    pub fn build(limit: u64) -> Result<Self> {
        if limit < 2 {
            return Err(Error::SieveLimitTooSmall(limit));
        }
        if limit > MAX_SIEVE_LIMIT {
            return Err(Error::SieveLimitTooLarge(limit, MAX_SIEVE_LIMIT));
        }
        let len = limit as usize + 1;
        let mut spf = vec![0u32; len];
        let mut mobius = vec![0i8; len];
        let mut primes: Vec<u32> = Vec::new();
        mobius[1] = 1;
        for i in 2..len {
            if spf[i] == 0 {
                spf[i] = i as u32;
                mobius[i] = -1;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                let m = i * p as usize;
                if p > si || m >= len {
                    break;
                }
                spf[m] = p;
                mobius[m] = if p == si { 0 } else { -mobius[i] };
            }
        }
        let mut squarefree = bitvec![0; len];
        for (n, &mu) in mobius.iter().enumerate() {
            if mu != 0 {
                squarefree.set(n, true);
            }
        }
        Ok(Self {
            limit,
            spf,
            mobius,
            squarefree,
            primes,
        })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// Primes up to the limit, ascending.
    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    /// Primes `p <= x` (clamped to the limit).
    pub fn primes_up_to(&self, x: u64) -> &[u32] {
        let end = self.primes.partition_point(|&p| (p as u64) <= x);
        &self.primes[..end]
    }

    /// Smallest prime factor of `2 <= n <= limit`.
    pub fn smallest_prime_factor(&self, n: u64) -> u64 {
        assert!((2..=self.limit).contains(&n), "{n} outside sieve range");
        self.spf[n as usize] as u64
    }

    /// μ(n) for `1 <= n <= limit`.
    pub fn mobius(&self, n: u64) -> i8 {
        assert!((1..=self.limit).contains(&n), "{n} outside sieve range");
        self.mobius[n as usize]
    }

    /// μ²(n) for `0 <= n <= limit`, with μ²(0) = 0.
    pub fn is_squarefree(&self, n: u64) -> bool {
        assert!(n <= self.limit, "{n} outside sieve range");
        self.squarefree[n as usize]
    }

    pub fn is_prime(&self, n: u64) -> bool {
        n >= 2 && n <= self.limit && self.spf[n as usize] as u64 == n
    }

    /// Full factorization of `n`.
    ///
    /// Values up to the limit use the smallest-prime-factor table. Larger
    /// values are trial divided by the sieved primes; a leftover cofactor
    /// `<= limit^2` is necessarily prime.
    pub fn factorize(&self, n: u64) -> Result<FactoredInt> {
        if n == 0 {
            return Err(Error::InvalidArgument("cannot factor 0".into()));
        }
        let mut factors: Vec<(u64, u32)> = Vec::new();
        let push = |factors: &mut Vec<(u64, u32)>, p: u64| match factors.last_mut() {
            Some((q, e)) if *q == p => *e += 1,
            _ => factors.push((p, 1)),
        };
        let mut m = n;
        if m <= self.limit {
            while m > 1 {
                let p = self.spf[m as usize] as u64;
                push(&mut factors, p);
                m /= p;
            }
            return Ok(FactoredInt { value: n, factors });
        }
        for &p in &self.primes {
            let p = p as u64;
            if p * p > m {
                break;
            }
            while m % p == 0 {
                push(&mut factors, p);
                m /= p;
            }
            if m <= self.limit {
                while m > 1 {
                    let p = self.spf[m as usize] as u64;
                    push(&mut factors, p);
                    m /= p;
                }
                break;
            }
        }
        if m > 1 {
            let largest = self.limit as u128 * self.limit as u128;
            if m as u128 > largest {
                return Err(Error::Unfactored {
                    value: n,
                    cofactor: m,
                });
            }
            push(&mut factors, m);
        }
        Ok(FactoredInt { value: n, factors })
    }
}

/// A positive integer together with its prime factorization.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FactoredInt {
    value: u64,
    factors: Vec<(u64, u32)>,
}

impl FactoredInt {
    pub fn one() -> Self {
        Self {
            value: 1,
            factors: Vec::new(),
        }
    }

    /// Builds from `(prime, exponent)` pairs; primes must be strictly
    /// increasing and exponents positive. Primality is not checked.
    pub fn from_factors(factors: Vec<(u64, u32)>) -> Result<Self> {
        let mut value: u64 = 1;
        for (i, &(p, e)) in factors.iter().enumerate() {
            if p < 2 || e == 0 || (i > 0 && factors[i - 1].0 >= p) {
                return Err(Error::InvalidArgument(format!(
                    "malformed factor list {factors:?}"
                )));
            }
            let pe = p
                .checked_pow(e)
                .and_then(|pe| value.checked_mul(pe))
                .ok_or_else(|| Error::InvalidArgument("factored value overflows u64".into()))?;
            value = pe;
        }
        Ok(Self { value, factors })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    /// Number of distinct prime factors.
    pub fn omega(&self) -> usize {
        self.factors.len()
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    pub fn is_cubefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e <= 2)
    }

    /// Exponent of `p` in the value (0 when `p` does not divide it).
    pub fn exponent_of(&self, p: u64) -> u32 {
        self.factors
            .iter()
            .find(|&&(q, _)| q == p)
            .map_or(0, |&(_, e)| e)
    }

    /// Factorization of a divisor `d` of this value.
    pub fn divisor(&self, d: u64) -> Result<FactoredInt> {
        if d == 0 || self.value % d != 0 {
            return Err(Error::NotADivisor { d, a: self.value });
        }
        let mut m = d;
        let mut factors = Vec::new();
        for &(p, _) in &self.factors {
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            if e > 0 {
                factors.push((p, e));
            }
        }
        debug_assert_eq!(m, 1);
        Ok(FactoredInt { value: d, factors })
    }

    /// All positive divisors, ascending.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.factors {
            let len = divs.len();
            let mut pk = 1u64;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    divs.push(divs[i] * pk);
                }
            }
        }
        divs.sort_unstable();
        divs
    }
}

/// Euler's totient φ(n).
pub fn euler_phi(n: &FactoredInt) -> u64 {
    n.factors
        .iter()
        .map(|&(p, e)| (p - 1) * p.pow(e - 1))
        .product()
}

/// Sum of divisors σ(n).
pub fn sigma(n: &FactoredInt) -> u64 {
    n.factors
        .iter()
        .map(|&(p, e)| (p.pow(e + 1) - 1) / (p - 1))
        .product()
}

/// Möbius function μ(n).
pub fn mobius(n: &FactoredInt) -> i8 {
    if !n.is_squarefree() {
        0
    } else if n.omega() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Writes a cubefree `q` as `q1 * q2^2` with `q1 q2` square-free.
pub fn cubefree_split(q: &FactoredInt) -> Result<(FactoredInt, FactoredInt)> {
    if !q.is_cubefree() {
        return Err(Error::NotCubefree(q.value));
    }
    let mut q1 = Vec::new();
    let mut q2 = Vec::new();
    for &(p, e) in &q.factors {
        if e == 1 {
            q1.push((p, 1));
        } else {
            q2.push((p, 1));
        }
    }
    Ok((
        FactoredInt::from_factors(q1)?,
        FactoredInt::from_factors(q2)?,
    ))
}

/// Ramanujan sum `c_r(n)`, evaluated multiplicatively over the prime powers
/// of `r`. Negative `n` is reduced through `|n| mod r`; `c_r(0) = φ(r)`.
pub fn ramanujan_sum(r: &FactoredInt, n: i64) -> i64 {
    let n = n.unsigned_abs() % r.value;
    let mut acc: i64 = 1;
    for &(p, e) in &r.factors {
        // valuation of n at p, capped at e (n == 0 counts as divisible)
        let mut v = 0;
        if n == 0 {
            v = e;
        } else {
            let mut m = n;
            while v < e && m % p == 0 {
                m /= p;
                v += 1;
            }
        }
        let local = if v == e {
            ((p - 1) * p.pow(e - 1)) as i64
        } else if v + 1 == e {
            -(p.pow(e - 1) as i64)
        } else {
            return 0;
        };
        acc *= local;
    }
    acc
}

/// `t(q) = ∏_{p | q} -1/(p^2 - 1)`.
pub fn t_factor(q: &FactoredInt) -> Rational {
    q.factors
        .iter()
        .fold(Rational::from_integer(1), |acc, &(p, _)| {
            let p = p as i128;
            acc * Rational::new(-1, p * p - 1)
        })
}

/// Evaluates `Σ_{k | a, d | k} μ(k/d)`, which is 1 exactly when `d = a`.
pub fn mobius_detect(a: &FactoredInt, d: u64) -> Result<u8> {
    a.divisor(d)?;
    let mut sum: i64 = 0;
    for k in a.divisors() {
        if k % d == 0 {
            sum += mobius(&a.divisor(k / d)?) as i64;
        }
    }
    debug_assert!(sum == 0 || sum == 1);
    Ok(sum as u8)
}

pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a.lcm(&b)
}

/// Canonical residue of `a` modulo `q`, in `[0, q)`.
pub fn residue(a: i64, q: u64) -> u64 {
    a.rem_euclid(q as i64) as u64
}
