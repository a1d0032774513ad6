//! Ground-truth counting by segmented sieving.
//!
//! All counts walk `[lo, hi)` windows of a fixed length. Windows are sieved
//! independently (in parallel under rayon) and their partial sums are merged
//! in window order, so results do not depend on the thread count.

use std::time::{Duration, Instant};

use bitvec::prelude::*;
use rayon::prelude::*;

use crate::arith::{gcd, residue, SieveTables};
use crate::error::{Error, Result};
use crate::global::GlobalFn;
use crate::scalar::{FixedPointSum, Scalar};

/// Default window length in integers.
pub const DEFAULT_WINDOW: usize = 1 << 20;

/// Bytes of working memory per integer of window (prime and square-free
/// flags).
pub const BYTES_PER_WINDOW_SLOT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SieveConfig {
    pub window: usize,
}

impl Default for SieveConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
        }
    }
}

impl SieveConfig {
    /// Window sized so one window's buffers fit in `bytes`.
    pub fn from_memory_cap(bytes: usize) -> Self {
        Self {
            window: (bytes / BYTES_PER_WINDOW_SLOT).max(1024),
        }
    }
}

/// Weighted and unweighted representation counts of `N = p + n` with
/// `p ≡ a` mod `q` and `n` square-free.
#[derive(Debug, Clone, PartialEq)]
pub struct CountResult {
    pub n: u64,
    pub a: u64,
    pub q: u64,
    /// `Σ log p` over qualifying primes.
    pub weighted: f64,
    pub unweighted: u64,
    /// `Σ Λ(m) μ²(N - m)` over `m ≤ N`, `m ≡ a` mod `q`.
    pub lambda_weighted: f64,
    pub elapsed: Duration,
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

fn check_coverage(max_value: u64, tables: &SieveTables) -> Result<()> {
    let cap = tables.limit() as u128 * tables.limit() as u128;
    if max_value as u128 > cap {
        return Err(Error::Capacity(format!(
            "{max_value} exceeds the square {cap} of the sieve limit {}",
            tables.limit()
        )));
    }
    Ok(())
}

/// Square-free flags of `[lo, hi)` written into `out` (μ²(0) = 0).
fn sieve_squarefree_into(lo: u64, hi: u64, tables: &SieveTables, out: &mut Vec<bool>) {
    out.clear();
    out.resize((hi - lo) as usize, true);
    if lo == 0 && hi > 0 {
        out[0] = false;
    }
    if hi <= 1 {
        return;
    }
    for &p in tables.primes_up_to(isqrt(hi - 1)) {
        let pp = p as u64 * p as u64;
        let mut m = lo.div_ceil(pp) * pp;
        while m < hi {
            out[(m - lo) as usize] = false;
            m += pp;
        }
    }
}

/// Prime flags of `[lo, hi)` written into `out`.
fn sieve_primes_into(lo: u64, hi: u64, tables: &SieveTables, out: &mut Vec<bool>) {
    out.clear();
    out.resize((hi - lo) as usize, true);
    for x in lo..hi.min(2) {
        out[(x - lo) as usize] = false;
    }
    if hi <= 2 {
        return;
    }
    for &p in tables.primes_up_to(isqrt(hi - 1)) {
        let p = p as u64;
        let mut m = (lo.div_ceil(p) * p).max(p * p);
        while m < hi {
            out[(m - lo) as usize] = false;
            m += p;
        }
    }
}

/// Bit `i` is set iff `lo + i` is square-free, over the half-open window
/// `[lo, hi)`. Requires `hi - 1 <= limit²`.
pub fn segmented_squarefree_sieve(lo: u64, hi: u64, tables: &SieveTables) -> Result<BitVec> {
    if hi < lo {
        return Err(Error::InvalidArgument(format!("empty window [{lo}, {hi})")));
    }
    check_coverage(hi.saturating_sub(1), tables)?;
    let mut buf = Vec::new();
    sieve_squarefree_into(lo, hi, tables, &mut buf);
    Ok(buf.into_iter().collect())
}

/// Bit `i` is set iff `lo + i` is prime, over `[lo, hi)`.
pub fn segmented_prime_sieve(lo: u64, hi: u64, tables: &SieveTables) -> Result<BitVec> {
    if hi < lo {
        return Err(Error::InvalidArgument(format!("empty window [{lo}, {hi})")));
    }
    check_coverage(hi.saturating_sub(1), tables)?;
    let mut buf = Vec::new();
    sieve_primes_into(lo, hi, tables, &mut buf);
    Ok(buf.into_iter().collect())
}

fn windows(lo: u64, hi: u64, len: usize) -> Vec<(u64, u64)> {
    let len = len.max(1) as u64;
    let mut out = Vec::new();
    let mut start = lo;
    while start < hi {
        let end = (start + len).min(hi);
        out.push((start, end));
        start = end;
    }
    out
}

/// μ² of any `m <= limit²`.
pub fn is_squarefree_any(m: u64, tables: &SieveTables) -> Result<bool> {
    if m <= tables.limit() {
        Ok(tables.is_squarefree(m))
    } else {
        Ok(tables.factorize(m)?.is_squarefree())
    }
}

#[derive(Debug, Clone, Default)]
struct Bucket {
    weighted: FixedPointSum,
    unweighted: u64,
    prime_powers: FixedPointSum,
}

/// Representation counts for several moduli gathered in one sieve pass.
#[derive(Debug, Clone)]
pub struct RepresentationTable {
    n: u64,
    moduli: Vec<u64>,
    buckets: Vec<Vec<Bucket>>,
    elapsed: Duration,
}

impl RepresentationTable {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    /// Result for residue `a` modulo one of the tabulated moduli.
    pub fn get(&self, a: i64, q: u64) -> Option<CountResult> {
        let qi = self.moduli.iter().position(|&m| m == q)?;
        let r = residue(a, q);
        let b = &self.buckets[qi][r as usize];
        let mut lambda = b.weighted;
        lambda.merge(&b.prime_powers);
        Some(CountResult {
            n: self.n,
            a: r,
            q,
            weighted: b.weighted.value(),
            unweighted: b.unweighted,
            lambda_weighted: lambda.value(),
            elapsed: self.elapsed,
        })
    }

    /// All `(a, q)` results with `(a, q) = 1`, ordered by `q` then `a`.
    pub fn coprime_results(&self) -> Vec<CountResult> {
        self.moduli
            .iter()
            .flat_map(|&q| {
                (0..q)
                    .filter(move |&a| gcd(a, q) == 1)
                    .map(move |a| self.get(a as i64, q).expect("tabulated"))
            })
            .collect()
    }
}

/// One pass over primes `p <= N - 1`, bucketing `log p` by `p mod q` for
/// every `q` in `moduli` whenever `N - p` is square-free.
pub fn count_representations_batch(
    n: u64,
    moduli: &[u64],
    tables: &SieveTables,
    cfg: &SieveConfig,
) -> Result<RepresentationTable> {
    let start = Instant::now();
    if moduli.contains(&0) {
        return Err(Error::InvalidArgument("modulus 0".into()));
    }
    check_coverage(n, tables)?;
    let fresh = || -> Vec<Vec<Bucket>> {
        moduli
            .iter()
            .map(|&q| vec![Bucket::default(); q as usize])
            .collect()
    };
    let partials: Vec<Vec<Vec<Bucket>>> = windows(2, n, cfg.window)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut primes = Vec::new();
            let mut sqf = Vec::new();
            sieve_primes_into(lo, hi, tables, &mut primes);
            // N - p for p in [lo, hi) covers [N - hi + 1, N - lo + 1)
            let base = n - hi + 1;
            sieve_squarefree_into(base, n - lo + 1, tables, &mut sqf);
            let mut buckets = fresh();
            for (i, &is_p) in primes.iter().enumerate() {
                if !is_p {
                    continue;
                }
                let p = lo + i as u64;
                if !sqf[(n - p - base) as usize] {
                    continue;
                }
                let w = (p as f64).ln();
                for (qi, &q) in moduli.iter().enumerate() {
                    let b = &mut buckets[qi][(p % q) as usize];
                    b.weighted.add(w);
                    b.unweighted += 1;
                }
            }
            buckets
        })
        .collect();

    let mut buckets = fresh();
    for part in &partials {
        for (acc, window) in buckets.iter_mut().zip(part) {
            for (a, w) in acc.iter_mut().zip(window) {
                a.weighted.merge(&w.weighted);
                a.unweighted += w.unweighted;
            }
        }
    }
    for &p in tables.primes_up_to(isqrt(n)) {
        let p = p as u64;
        let w = (p as f64).ln();
        let mut pk = p * p;
        while pk < n {
            if is_squarefree_any(n - pk, tables)? {
                for (qi, &q) in moduli.iter().enumerate() {
                    buckets[qi][(pk % q) as usize].prime_powers.add(w);
                }
            }
            match pk.checked_mul(p) {
                Some(next) => pk = next,
                None => break,
            }
        }
    }
    Ok(RepresentationTable {
        n,
        moduli: moduli.to_vec(),
        buckets,
        elapsed: start.elapsed(),
    })
}

/// `R_{a,q}(N) = Σ_{N = p + n, p ≡ a [q]} μ²(n) log p` with `n >= 1`.
pub fn count_representations(n: u64, a: i64, q: u64, tables: &SieveTables) -> Result<CountResult> {
    count_representations_with(n, a, q, tables, &SieveConfig::default())
}

pub fn count_representations_with(
    n: u64,
    a: i64,
    q: u64,
    tables: &SieveTables,
    cfg: &SieveConfig,
) -> Result<CountResult> {
    if q == 0 {
        return Err(Error::InvalidArgument("modulus 0".into()));
    }
    if gcd(residue(a, q), q) != 1 {
        return Err(Error::NotCoprime { a, q });
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!("N = {n} < 3")));
    }
    let table = count_representations_batch(n, &[q], tables, cfg)?;
    Ok(table.get(a, q).expect("tabulated"))
}

/// `#{n <= N : n ≡ a [q], N - n square-free}` with μ²(0) = 0.
pub fn squarefree_count_in_ap(n: u64, a: i64, q: u64, tables: &SieveTables) -> Result<u64> {
    squarefree_count_in_ap_with(n, a, q, tables, &SieveConfig::default())
}

pub fn squarefree_count_in_ap_with(
    n: u64,
    a: i64,
    q: u64,
    tables: &SieveTables,
    cfg: &SieveConfig,
) -> Result<u64> {
    if q == 0 {
        return Err(Error::InvalidArgument("modulus 0".into()));
    }
    // m = N - n ranges over [0, N - 1] with m ≡ N - a
    let target = residue(n as i64 - residue(a, q) as i64, q);
    if n <= tables.limit() {
        let mut count = 0;
        let mut m = target;
        while m < n {
            count += tables.is_squarefree(m) as u64;
            m += q;
        }
        return Ok(count);
    }
    check_coverage(n, tables)?;
    let counts: Vec<u64> = windows(0, n, cfg.window)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut sqf = Vec::new();
            sieve_squarefree_into(lo, hi, tables, &mut sqf);
            let mut m = lo + residue(target as i64 - lo as i64, q);
            let mut c = 0;
            while m < hi {
                c += sqf[(m - lo) as usize] as u64;
                m += q;
            }
            c
        })
        .collect();
    Ok(counts.iter().sum())
}

/// `ψ(N; q, a) = Σ_{n <= N, n ≡ a [q]} Λ(n)`.
pub fn psi_in_ap(n: u64, a: i64, q: u64, tables: &SieveTables) -> Result<f64> {
    psi_in_ap_with(n, a, q, tables, &SieveConfig::default())
}

pub fn psi_in_ap_with(
    n: u64,
    a: i64,
    q: u64,
    tables: &SieveTables,
    cfg: &SieveConfig,
) -> Result<f64> {
    if q == 0 {
        return Err(Error::InvalidArgument("modulus 0".into()));
    }
    let r = residue(a, q);
    if gcd(r, q) != 1 {
        return Err(Error::NotCoprime { a, q });
    }
    check_coverage(n, tables)?;
    let partials: Vec<FixedPointSum> = windows(2, n + 1, cfg.window)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut primes = Vec::new();
            sieve_primes_into(lo, hi, tables, &mut primes);
            let mut acc = FixedPointSum::new();
            let mut x = lo + residue(r as i64 - lo as i64, q);
            while x < hi {
                if primes[(x - lo) as usize] {
                    acc.add((x as f64).ln());
                }
                x += q;
            }
            acc
        })
        .collect();
    let mut total = FixedPointSum::new();
    partials.iter().for_each(|p| total.merge(p));
    for &p in tables.primes_up_to(isqrt(n)) {
        let p = p as u64;
        let w = (p as f64).ln();
        let mut pk = p * p;
        while pk <= n {
            if pk % q == r {
                total.add(w);
            }
            match pk.checked_mul(p) {
                Some(next) => pk = next,
                None => break,
            }
        }
    }
    Ok(total.value())
}

/// `f(n) = Λ(n) 1_{n ≡ a' [q']}` on `[1, N]`; needs `N <= limit`.
pub fn von_mangoldt_progression(
    n: u64,
    a_prime: u64,
    q_prime: u64,
    tables: &SieveTables,
) -> Result<GlobalFn<f64>> {
    if n > tables.limit() {
        return Err(Error::Capacity(format!(
            "materializing [1, {n}] needs a sieve limit >= {n}"
        )));
    }
    let r = a_prime % q_prime;
    Ok(GlobalFn::from_fn(n, |m| {
        if m < 2 || m % q_prime != r {
            return 0.0;
        }
        let p = tables.smallest_prime_factor(m);
        let mut rest = m;
        while rest % p == 0 {
            rest /= p;
        }
        if rest == 1 {
            (p as f64).ln()
        } else {
            0.0
        }
    }))
}

/// `g(n) = μ²(N - n)` on `[1, N]`; needs `N <= limit`.
pub fn shifted_squarefree<T: Scalar>(n: u64, tables: &SieveTables) -> Result<GlobalFn<T>> {
    if n > tables.limit() {
        return Err(Error::Capacity(format!(
            "materializing [1, {n}] needs a sieve limit >= {n}"
        )));
    }
    let one = T::one();
    Ok(GlobalFn::from_fn(n, |m| {
        if tables.is_squarefree(n - m) {
            one.clone()
        } else {
            T::zero()
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tables() -> SieveTables {
        SieveTables::build(100_000).unwrap()
    }

    #[test]
    fn small_representation_examples() {
        let t = tables();
        let r = count_representations(10, 0, 1, &t).unwrap();
        assert_eq!(r.unweighted, 3);
        assert!((r.weighted - 105f64.ln()).abs() < 1e-12);
        assert!((r.weighted - 4.65396).abs() < 1e-5);
        let r = count_representations(5, 1, 4, &t).unwrap();
        assert_eq!((r.unweighted, r.weighted), (0, 0.0));
        let r = count_representations(20, 2, 3, &t).unwrap();
        assert_eq!(r.unweighted, 2);
        assert!((r.weighted - 85f64.ln()).abs() < 1e-12);
        assert_eq!(
            count_representations(20, 3, 3, &t).unwrap_err(),
            Error::NotCoprime { a: 3, q: 3 }
        );
    }

    #[test]
    fn brute_force_agreement() {
        let t = tables();
        for n in [3u64, 4, 17, 100, 1001, 4096] {
            for q in 1..=10u64 {
                for a in (0..q).filter(|&a| gcd(a, q) == 1) {
                    let mut w = 0.0;
                    let mut lam = 0.0;
                    let mut c = 0;
                    for m in 2..n {
                        if m % q != a || !t.is_squarefree(n - m) {
                            continue;
                        }
                        let f = t.factorize(m).unwrap();
                        if f.omega() == 1 {
                            let p = f.factors()[0].0 as f64;
                            lam += p.ln();
                            if f.factors()[0].1 == 1 {
                                w += p.ln();
                                c += 1;
                            }
                        }
                    }
                    let small = SieveConfig { window: 7 };
                    let r = count_representations_with(n, a as i64, q, &t, &small).unwrap();
                    assert_eq!(r.unweighted, c);
                    assert!((r.weighted - w).abs() < 1e-9, "N={n} q={q} a={a}");
                    assert!((r.lambda_weighted - lam).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn squarefree_count_examples() {
        let t = tables();
        assert_eq!(squarefree_count_in_ap(10, 0, 1, &t).unwrap(), 6);
        assert_eq!(squarefree_count_in_ap(10, 0, 10, &t).unwrap(), 0);
        let small = SieveTables::build(100).unwrap();
        // segmented path (N above the table limit) agrees with the table path
        for q in 1..=9u64 {
            for a in 0..q as i64 {
                assert_eq!(
                    squarefree_count_in_ap_with(5000, a, q, &small, &SieveConfig { window: 333 })
                        .unwrap(),
                    squarefree_count_in_ap(5000, a, q, &t).unwrap()
                );
            }
        }
    }

    #[test]
    fn psi_small() {
        let t = tables();
        let psi = psi_in_ap(100, 0, 1, &t).unwrap();
        let direct: f64 = (2..=100u64)
            .filter_map(|m| {
                let f = t.factorize(m).unwrap();
                (f.omega() == 1).then(|| (f.factors()[0].0 as f64).ln())
            })
            .sum();
        assert!((psi - direct).abs() < 1e-10);
        assert!((psi - 94.045).abs() < 1e-3);
        // q > N: at most the single term n = a
        assert!((psi_in_ap(50, 47, 101, &t).unwrap() - 47f64.ln()).abs() < 1e-12);
        assert_eq!(psi_in_ap(50, 48, 101, &t).unwrap(), 0.0);
        assert!(psi_in_ap(50, 2, 4, &t).is_err());
    }

    #[test]
    fn windows_match_tables() {
        let t = tables();
        let bits = segmented_squarefree_sieve(1, 31, &t).unwrap();
        for (i, b) in bits.iter().enumerate() {
            assert_eq!(*b, t.is_squarefree(1 + i as u64));
        }
        let bits = segmented_prime_sieve(0, 1000, &t).unwrap();
        for (i, b) in bits.iter().enumerate() {
            assert_eq!(*b, t.is_prime(i as u64));
        }
        let small = SieveTables::build(10).unwrap();
        assert!(segmented_squarefree_sieve(90, 101, &small).is_ok());
        assert!(matches!(
            segmented_squarefree_sieve(90, 102, &small),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn materialized_functions() {
        let t = tables();
        let f = von_mangoldt_progression(30, 1, 4, &t).unwrap();
        assert!((f.at(9) - 3f64.ln()).abs() < 1e-15);
        assert_eq!(*f.at(7), 0.0);
        assert!((f.at(29) - 29f64.ln()).abs() < 1e-15);
        let g = shifted_squarefree::<f64>(10, &t).unwrap();
        assert_eq!(g.sum(), 6.0);
        assert_eq!(*g.at(10), 0.0);
    }
}
