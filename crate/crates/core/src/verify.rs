//! Exact identity suites. Every check compares an implementation route with
//! an independent one (a closed form, a definition, or direct summation)
//! in exact arithmetic and reports the first counterexample.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::arith::{
    euler_phi, gcd, lcm, mobius, mobius_detect, ramanujan_sum, residue, sigma, FactoredInt,
    Rational, SieveTables,
};
use crate::error::{Error, Result};
use crate::estimator::{build_moduli_set, Estimator, WeightMode};
use crate::global::{delta, global_product, nabla, nabla_local, GlobalFn, LocalFn};
use crate::local::{local_product, LocalModel, ProgressionContext, ScaledValue};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Arith,
    Local,
    Estimator,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Arith, Suite::Local, Suite::Estimator];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Arith => "arith",
            Suite::Local => "local",
            Suite::Estimator => "estimator",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arith" => Ok(Suite::Arith),
            "local" => Ok(Suite::Local),
            "estimator" => Ok(Suite::Estimator),
            other => Err(Error::InvalidArgument(format!("unknown suite {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyBounds {
    /// Ramanujan sums `c_r(n)` for `r <= r_max`, `0 <= n <= 2r`.
    pub r_max: u64,
    /// Divisor detection for `a <= a_max`.
    pub a_max: u64,
    /// Double Möbius sums over cubefree `m, n <= mn_max`.
    pub mn_max: u64,
    /// Closed forms of `γ*`, `ρ`, `ρ*` for cubefree `q <= q_max`.
    pub q_max: u64,
    /// Norms, cross products, `b(q)`, `η*`, `κ*` for cubefree `q <= q_small_max`.
    pub q_small_max: u64,
    /// Averaging identities over `d | q` for `q <= q_average_max`.
    pub q_average_max: u64,
    /// All `q' <= qp_max` with every reduced `a'`.
    pub qp_max: u64,
    /// Values of `N` for the `N`-dependent checks.
    pub n_values: Vec<u64>,
    /// Seeded random cases per estimator check.
    pub random_cases: usize,
    /// Largest `N` for random estimator cases.
    pub estimator_n_max: u64,
    pub seed: u64,
}

impl Default for VerifyBounds {
    fn default() -> Self {
        Self {
            r_max: 300,
            a_max: 500,
            mn_max: 200,
            q_max: 400,
            q_small_max: 200,
            q_average_max: 60,
            qp_max: 30,
            n_values: vec![1000, 1155],
            random_cases: 100,
            estimator_n_max: 10_000,
            seed: 0x5eed,
        }
    }
}

/// Substitutable pieces, so the suites can be run against a deliberately
/// broken implementation.
#[derive(Debug, Clone, Copy)]
pub struct Hooks {
    pub t_factor: fn(&FactoredInt) -> Rational,
}

impl Default for Hooks {
    fn default() -> Self {
        Self {
            t_factor: crate::arith::t_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: u64,
    pub failures: u64,
    pub counterexample: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{status} {:<28} cases={:<9} failures={}",
            self.name, self.cases, self.failures
        )?;
        if let Some(c) = &self.counterexample {
            write!(f, " first counterexample: {c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub suite: Suite,
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn failed_checks(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.name)
            .collect()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {}", self.suite.name())?;
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Tally {
    cases: u64,
    failures: u64,
    counterexample: Option<String>,
}

impl Tally {
    fn case(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.counterexample.is_none() {
                self.counterexample = Some(describe());
            }
        }
    }

    fn error(&mut self, at: impl fmt::Display, e: Error) {
        self.case(false, || format!("{at}: {e}"));
    }

    fn merge(&mut self, other: Tally) {
        self.cases += other.cases;
        self.failures += other.failures;
        if self.counterexample.is_none() {
            self.counterexample = other.counterexample;
        }
    }
}

/// Runs `f` over `items` in parallel and merges tallies in item order.
fn check<I, F>(name: &'static str, items: &[I], f: F) -> CheckResult
where
    I: Sync,
    F: Fn(&I, &mut Tally) -> Result<()> + Sync,
{
    let parts: Vec<Tally> = items
        .par_iter()
        .enumerate()
        .map(|(i, item)| {
            let mut t = Tally::default();
            if let Err(e) = f(item, &mut t) {
                t.error(format!("item {i}"), e);
            }
            t
        })
        .collect();
    let mut total = Tally::default();
    parts.into_iter().for_each(|t| total.merge(t));
    CheckResult {
        name,
        cases: total.cases,
        failures: total.failures,
        counterexample: total.counterexample,
    }
}

/// Like [`check`], for several checks sharing one pass over `items`.
fn check_many<I, F>(names: &[&'static str], items: &[I], f: F) -> Vec<CheckResult>
where
    I: Sync,
    F: Fn(&I, &mut [Tally]) -> Result<()> + Sync,
{
    let parts: Vec<Vec<Tally>> = items
        .par_iter()
        .enumerate()
        .map(|(i, item)| {
            let mut ts: Vec<Tally> = names.iter().map(|_| Tally::default()).collect();
            if let Err(e) = f(item, &mut ts) {
                ts.iter_mut()
                    .for_each(|t| t.error(format!("item {i}"), e.clone()));
            }
            ts
        })
        .collect();
    let mut totals: Vec<Tally> = names.iter().map(|_| Tally::default()).collect();
    for part in parts {
        for (total, t) in totals.iter_mut().zip(part) {
            total.merge(t);
        }
    }
    names
        .iter()
        .zip(totals)
        .map(|(&name, t)| CheckResult {
            name,
            cases: t.cases,
            failures: t.failures,
            counterexample: t.counterexample,
        })
        .collect()
}

fn same(a: &ScaledValue, b: &ScaledValue) -> bool {
    (a.is_zero() && b.is_zero()) || a == b
}

fn r(n: i128) -> Rational {
    Rational::from_integer(n)
}

pub fn run_suite(suite: Suite, bounds: &VerifyBounds, hooks: &Hooks) -> Result<Report> {
    let checks = match suite {
        Suite::Arith => arith_suite(bounds)?,
        Suite::Local => local_suite(bounds, hooks)?,
        Suite::Estimator => estimator_suite(bounds)?,
    };
    Ok(Report { suite, checks })
}

fn arith_suite(b: &VerifyBounds) -> Result<Vec<CheckResult>> {
    let limit = (2 * b.r_max).max(b.a_max).max(b.mn_max).max(16);
    let t = SieveTables::build(limit)?;
    let rs: Vec<u64> = (1..=b.r_max).collect();
    let fac = |n: u64| t.factorize(n);
    let mut out = Vec::new();

    out.push(check("phi_sigma_mobius", &rs, |&n, tally| {
        let f = fac(n)?;
        let phi = (1..=n).filter(|&k| gcd(k, n) == 1).count() as u64;
        let sig: u64 = (1..=n).filter(|&d| n % d == 0).sum();
        // μ(n) = Σ_{(k,n)=1} e(k/n), the integer part of a Ramanujan sum at 1
        let mu = (1..=n)
            .filter(|&k| gcd(k, n) == 1)
            .map(|k| (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos());
        let mu = mu.sum::<f64>().round() as i8;
        tally.case(
            euler_phi(&f) == phi && sigma(&f) == sig && mobius(&f) == mu,
            || format!("n = {n}"),
        );
        Ok(())
    }));

    out.push(check("ramanujan_exponential_sum", &rs, |&rr, tally| {
        let f = fac(rr)?;
        for n in 0..=2 * rr as i64 {
            let direct: f64 = (1..=rr)
                .filter(|&a| gcd(a, rr) == 1)
                .map(|a| {
                    let x = ((a as i128 * n as i128) % rr as i128) as f64 / rr as f64;
                    (2.0 * std::f64::consts::PI * x).cos()
                })
                .sum();
            let c = ramanujan_sum(&f, n);
            tally.case((direct - c as f64).abs() < 1e-6 * rr as f64, || {
                format!("c_{rr}({n}) = {c}, exponential sum {direct}")
            });
        }
        Ok(())
    }));

    out.push(check("ramanujan_divisor_sum", &rs, |&rr, tally| {
        let f = fac(rr)?;
        for n in 0..=2 * rr as i64 {
            let g = gcd(rr, n as u64);
            let div_sum: i64 = f
                .divisors()
                .into_iter()
                .filter(|d| g % d == 0)
                .map(|d| d as i64 * mobius(&f.divisor(rr / d).expect("divisor")) as i64)
                .sum();
            let quotient = f.divisor(rr / g)?;
            let phi_form =
                mobius(&quotient) as i64 * euler_phi(&f) as i64 / euler_phi(&quotient) as i64;
            let c = ramanujan_sum(&f, n);
            tally.case(c == div_sum && c == phi_form, || {
                format!("c_{rr}({n}) = {c}, divisor sum {div_sum}, φ form {phi_form}")
            });
        }
        Ok(())
    }));

    out.push(check("ramanujan_multiplicative", &rs, |&rr, tally| {
        let f = fac(rr)?;
        for (p, e) in f.factors().iter().copied() {
            let pe = p.pow(e);
            let (a, bb) = (f.divisor(pe)?, f.divisor(rr / pe)?);
            for n in 0..=2 * rr as i64 {
                let lhs = ramanujan_sum(&f, n);
                let rhs = ramanujan_sum(&a, n) * ramanujan_sum(&bb, n);
                tally.case(lhs == rhs, || format!("r = {pe}·{}, n = {n}", rr / pe));
            }
        }
        Ok(())
    }));

    let primes: Vec<u64> = t
        .primes_up_to(((b.r_max as f64).sqrt() as u64).max(2))
        .iter()
        .map(|&p| p as u64)
        .collect();
    out.push(check("ramanujan_prime_values", &primes, |&p, tally| {
        let fp = FactoredInt::from_factors(vec![(p, 1)])?;
        let fp2 = FactoredInt::from_factors(vec![(p, 2)])?;
        for n in 0..=(2 * p * p) as i64 {
            let un = n as u64;
            let cp = if un % p == 0 { p as i64 - 1 } else { -1 };
            let cp2 = if un % (p * p) == 0 {
                (p * p - p) as i64
            } else if un % p == 0 {
                -(p as i64)
            } else {
                0
            };
            tally.case(
                ramanujan_sum(&fp, n) == cp && ramanujan_sum(&fp2, n) == cp2,
                || format!("p = {p}, n = {n}"),
            );
        }
        Ok(())
    }));

    let avals: Vec<u64> = (1..=b.a_max).collect();
    out.push(check("divisor_detection", &avals, |&a, tally| {
        let f = fac(a)?;
        for d in f.divisors() {
            let got = mobius_detect(&f, d)?;
            tally.case(got == (d == a) as u8, || format!("a = {a}, d = {d}: {got}"));
        }
        Ok(())
    }));

    let cubefree: Vec<FactoredInt> = (1..=b.mn_max)
        .map(fac)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(FactoredInt::is_cubefree)
        .collect();
    out.push(check("double_mobius", &cubefree, |m, tally| {
        for n in &cubefree {
            let mut sum: i64 = 0;
            for d1 in m.divisors() {
                let mu1 = mobius(&m.divisor(m.value() / d1)?) as i64;
                if mu1 == 0 {
                    continue;
                }
                for d2 in n.divisors() {
                    let mu2 = mobius(&n.divisor(n.value() / d2)?) as i64;
                    sum += mu1 * mu2 * gcd(d1, d2) as i64;
                }
            }
            let expected = if m.value() == n.value() {
                euler_phi(m) as i64
            } else {
                0
            };
            tally.case(sum == expected, || {
                format!("m = {}, n = {}: {sum} vs {expected}", m.value(), n.value())
            });
        }
        Ok(())
    }));
    Ok(out)
}

/// All `(q', a')` with `q' <= qp_max`, `1 <= a' <= q'`, `(a', q') = 1`, and
/// every configured `N`.
fn contexts(b: &VerifyBounds) -> Result<Vec<ProgressionContext>> {
    let mut out = Vec::new();
    for &n in &b.n_values {
        for qp in 1..=b.qp_max {
            for ap in (1..=qp).filter(|&a| gcd(a, qp) == 1) {
                out.push(ProgressionContext::new(n, ap as i64, qp)?);
            }
        }
    }
    Ok(out)
}

fn local_suite(b: &VerifyBounds, hooks: &Hooks) -> Result<Vec<CheckResult>> {
    let limit = (b.q_max * b.qp_max.max(1)).max(b.q_max * b.q_max).max(64);
    let t = SieveTables::build(limit)?;
    let tf = hooks.t_factor;
    let all_ctx = contexts(b)?;
    // N only enters through ϑ*, b, η*, κ*; the ρ checks use the first N
    let first_n = b.n_values.first().copied().unwrap_or(1000);
    let rho_ctx: Vec<ProgressionContext> = all_ctx
        .iter()
        .filter(|c| c.n() == first_n)
        .copied()
        .collect();
    let qs: Vec<u64> = (1..=b.q_max).collect();
    let cube_qs: Vec<u64> = qs
        .iter()
        .copied()
        .filter(|&q| t.factorize(q).map(|f| f.is_cubefree()).unwrap_or(false))
        .collect();
    let small_qs: Vec<u64> = cube_qs
        .iter()
        .copied()
        .filter(|&q| q <= b.q_small_max)
        .collect();
    let base_model = LocalModel::new(ProgressionContext::new(first_n, 1, 1)?, &t);
    let mut out = Vec::new();

    out.push(check("gamma_star_closed_form", &qs, |&q, tally| {
        let f = t.factorize(q)?;
        for a in 0..q as i64 {
            let got = base_model.gamma_star(q, a)?;
            let expected = if f.is_cubefree() {
                ScaledValue::new(tf(&f) * ramanujan_sum(&f, a) as i128, 1)
            } else {
                ScaledValue::zero(1)
            };
            tally.case(same(&got, &expected), || {
                format!("q = {q}, a = {a}: {got} vs {expected}")
            });
        }
        Ok(())
    }));

    let avg_qs: Vec<u64> = cube_qs
        .iter()
        .copied()
        .filter(|&q| q <= b.q_average_max)
        .collect();
    out.push(check("gamma_average", &avg_qs, |&q, tally| {
        let f = t.factorize(q)?;
        let gq: Vec<ScaledValue> = (0..q as i64)
            .map(|a| base_model.gamma_q(q, a))
            .collect::<Result<_>>()?;
        for d in f.divisors() {
            for s in 0..q as i64 {
                let mut sum = ScaledValue::zero(1);
                for a in (0..q as i64).filter(|a| residue(s - a, d) == 0) {
                    sum = sum.try_add(&gq[a as usize])?;
                }
                let lhs = base_model.gamma_q(d, s)?.scale(r((q / d) as i128));
                tally.case(same(&lhs, &sum), || format!("q = {q}, d = {d}, s = {s}"));
            }
        }
        Ok(())
    }));

    let avg_ctx: Vec<ProgressionContext> = rho_ctx
        .iter()
        .copied()
        .filter(|c| c.q_prime() <= 12)
        .collect();
    out.push(check("rho_average", &avg_ctx, |ctx, tally| {
        let m = LocalModel::new(*ctx, &t);
        for &q in &avg_qs {
            let f = t.factorize(q)?;
            let rq = m.rho_vector(q)?;
            for d in f.divisors() {
                let rd = m.rho_vector(d)?;
                for s in 0..q as i64 {
                    let sum = (0..q as i64)
                        .filter(|a| residue(s - a, d) == 0)
                        .fold(r(0), |acc, a| acc + rq.coeffs()[a as usize]);
                    let lhs = rd.coeffs()[residue(s, d) as usize] * (q / d) as i128;
                    tally.case(lhs == sum, || {
                        format!(
                            "q' = {}, a' = {}, q = {q}, d = {d}, s = {s}",
                            ctx.q_prime(),
                            ctx.a_prime()
                        )
                    });
                }
            }
        }
        Ok(())
    }));

    out.push(check("rho_definition", &rho_ctx, |ctx, tally| {
        let m = LocalModel::new(*ctx, &t);
        let (qp, ap) = (ctx.q_prime(), ctx.a_prime() as i64);
        for &q in &cube_qs {
            let phi_l = euler_phi(&t.factorize(lcm(q, qp))?) as i128;
            let g = gcd(q, qp) as i64;
            let rho = m.rho_vector(q)?;
            for a in 0..q as i64 {
                // CRT: n ≡ a [q], n ≡ a' [q'] has a unit solution mod [q, q']
                let solvable = gcd(a as u64, q) == 1 && (a - ap).rem_euclid(g) == 0;
                let expected = if solvable {
                    Rational::new(q as i128, phi_l)
                } else {
                    r(0)
                };
                tally.case(rho.coeffs()[a as usize] == expected, || {
                    format!("q' = {qp}, a' = {ap}, q = {q}, a = {a}")
                });
            }
        }
        Ok(())
    }));

    out.push(check("rho_multiplicative", &rho_ctx, |ctx, tally| {
        let m = LocalModel::new(*ctx, &t);
        let phi_qp = euler_phi(&t.factorize(ctx.q_prime())?) as i128;
        for &q in &cube_qs {
            let f = t.factorize(q)?;
            for &(p, e) in f.factors() {
                let q1 = p.pow(e);
                let q2 = q / q1;
                let (whole, v1, v2) = (m.rho_vector(q)?, m.rho_vector(q1)?, m.rho_vector(q2)?);
                for a in 0..q as i64 {
                    let lhs = whole.coeffs()[a as usize];
                    let rhs = v1.coeffs()[residue(a, q1) as usize]
                        * v2.coeffs()[residue(a, q2) as usize]
                        * phi_qp;
                    tally.case(lhs == rhs, || {
                        format!(
                            "q' = {}, a' = {}, q = {q1}·{q2}, a = {a}",
                            ctx.q_prime(),
                            ctx.a_prime()
                        )
                    });
                }
            }
        }
        Ok(())
    }));

    out.push(check("rho_star_closed_form", &rho_ctx, |ctx, tally| {
        let m = LocalModel::new(*ctx, &t);
        let qp = ctx.q_prime();
        let phi_qp = euler_phi(&t.factorize(qp)?) as i128;
        for &q in &cube_qs {
            let s = m.split(q)?;
            let rho = m.rho_star_vector(q)?;
            let mu_m = mobius(&s.m) as i128;
            let phi_m = euler_phi(&s.m) as i128;
            let ind = s.q2_squared_divides_q_prime(qp);
            for a in 0..q as i64 {
                let expected = if ind {
                    Rational::new(
                        mu_m * ramanujan_sum(&s.m, a) as i128
                            * ramanujan_sum(&s.k, a - ctx.a_prime() as i64) as i128,
                        phi_qp * phi_m,
                    )
                } else {
                    r(0)
                };
                let got = rho.coeffs()[a as usize];
                tally.case(got == expected, || {
                    format!(
                        "q' = {qp}, a' = {}, q = {q}, a = {a}: {got} vs {expected}",
                        ctx.a_prime()
                    )
                });
            }
        }
        Ok(())
    }));

    out.push(check("rho_star_multiplicative", &rho_ctx, |ctx, tally| {
        let m = LocalModel::new(*ctx, &t);
        let phi_qp = euler_phi(&t.factorize(ctx.q_prime())?) as i128;
        for &q in &cube_qs {
            let f = t.factorize(q)?;
            let whole = m.rho_star_vector(q)?;
            for &(p, e) in f.factors() {
                let q1 = p.pow(e);
                let q2 = q / q1;
                let (v1, v2) = (m.rho_star_vector(q1)?, m.rho_star_vector(q2)?);
                for a in 0..q as i64 {
                    let lhs = whole.coeffs()[a as usize] * phi_qp;
                    let rhs = v1.coeffs()[residue(a, q1) as usize]
                        * phi_qp
                        * v2.coeffs()[residue(a, q2) as usize]
                        * phi_qp;
                    tally.case(lhs == rhs, || {
                        format!(
                            "q' = {}, a' = {}, q = {q1}·{q2}, a = {a}",
                            ctx.q_prime(),
                            ctx.a_prime()
                        )
                    });
                }
            }
        }
        Ok(())
    }));

    out.push(check("theta_star_norm", &small_qs, |&q, tally| {
        let f = t.factorize(q)?;
        for &n in &b.n_values {
            let m = LocalModel::new(ProgressionContext::new(n, 1, 1)?, &t);
            let got = m.theta_star_vector(q)?.norm_squared();
            let tq = tf(&f);
            let expected = ScaledValue::new(tq * tq * euler_phi(&f) as i128, 2);
            tally.case(same(&got, &expected), || {
                format!("N = {n}, q = {q}: {got} vs {expected}")
            });
        }
        Ok(())
    }));

    out.push(check("rho_star_norm", &rho_ctx, |ctx, tally| {
        let m = LocalModel::new(*ctx, &t);
        let qp = ctx.q_prime();
        let phi_qp = euler_phi(&t.factorize(qp)?) as i128;
        for &q in &small_qs {
            let s = m.split(q)?;
            let got = m.rho_star_vector(q)?.norm_squared();
            let expected = if s.q2_squared_divides_q_prime(qp) {
                let q2 = s.q2.value();
                let phi_q2sq = euler_phi(&s.q.divisor(q2 * q2)?) as i128;
                let phi_g = euler_phi(&t.factorize(gcd(s.q1.value(), qp))?) as i128;
                Rational::new(
                    phi_q2sq * phi_g * phi_g,
                    phi_qp * phi_qp * euler_phi(&s.q1) as i128,
                )
            } else {
                r(0)
            };
            tally.case(got == ScaledValue::rational(expected), || {
                format!(
                    "q' = {qp}, a' = {}, q = {q}: {got} vs {expected}",
                    ctx.a_prime()
                )
            });
        }
        Ok(())
    }));

    const CONTEXT_CHECKS: [&str; 6] = [
        "b_multiplicative",
        "theta_rho_product",
        "eta_kappa_simplified",
        "eta_kappa_norms",
        "exceptional_set",
        "norm_sandwich",
    ];
    out.extend(check_many(&CONTEXT_CHECKS, &all_ctx, |ctx, tallies| {
        let [b_mult, theta_rho, simplified, norms, exceptional, sandwich] = tallies else {
            unreachable!()
        };
        let m = LocalModel::new(*ctx, &t);
        let qp = ctx.q_prime();
        let ap = ctx.a_prime() as i64;
        let phi_qp = euler_phi(&t.factorize(qp)?) as i128;
        let n = ctx.n() as i64;
        let na = n - ap;
        let at = |q: u64| format!("N = {n}, q' = {qp}, a' = {ap}, q = {q}");
        for &q in &small_qs {
            let s = m.split(q)?;
            let (eta, kappa) = (m.eta_star(q)?, m.kappa_star(q)?);
            let (theta, rho) = (m.theta_star_vector(q)?, m.rho_star_vector(q)?);
            let b_q = m.b_of_q(q)?;
            let tq = tf(&s.q);
            let phi = euler_phi(&s.q) as i128;
            let cm_n = ramanujan_sum(&s.m, n) as i128;
            let ck_na = ramanujan_sum(&s.k, na) as i128;

            let mut expected = r(1);
            for &(p, e) in s.q.factors() {
                let pi = p as i128;
                let local = if e == 1 {
                    let fp = FactoredInt::from_factors(vec![(p, 1)])?;
                    if qp % p != 0 {
                        Rational::new(-pi * ramanujan_sum(&fp, n) as i128, pi - 1)
                    } else {
                        r(pi * ramanujan_sum(&fp, na) as i128)
                    }
                } else if qp % (p * p) == 0 {
                    let fp2 = FactoredInt::from_factors(vec![(p, 2)])?;
                    r(pi * pi * ramanujan_sum(&fp2, na) as i128)
                } else {
                    r(0)
                };
                expected *= local;
            }
            b_mult.case(b_q == expected, || {
                format!("{}: {b_q} vs {expected}", at(q))
            });

            let got = local_product(&theta, &rho)?;
            let closed = if s.q2_squared_divides_q_prime(qp) {
                tq * Rational::new(
                    cm_n * ck_na,
                    phi_qp * mobius(&s.m) as i128 * euler_phi(&s.m) as i128,
                )
            } else {
                r(0)
            };
            let via_b = tq * b_q / (q as i128 * phi_qp);
            let (closed, via_b) = (ScaledValue::new(closed, 1), ScaledValue::new(via_b, 1));
            theta_rho.case(same(&got, &closed) && same(&got, &via_b), || {
                format!("{}: {got} vs {closed} / {via_b}", at(q))
            });

            let mut ok = true;
            for a in 0..q as i64 {
                let c = ramanujan_sum(&s.q, n - a) as i128;
                let d = ramanujan_sum(&s.m, a) as i128 * ramanujan_sum(&s.k, a - ap) as i128;
                ok &= eta.coeffs()[a as usize] == Rational::new(c + d, 2)
                    && kappa.coeffs()[a as usize] == Rational::new(c - d, 2);
            }
            simplified.case(ok, || at(q));

            let (eta_n, kappa_n) = (eta.norm_squared(), kappa.norm_squared());
            let cc = cm_n * ck_na;
            let ok = eta_n == ScaledValue::rational(Rational::new(phi + cc, 2))
                && kappa_n == ScaledValue::rational(Rational::new(phi - cc, 2))
                && local_product(&eta, &kappa)?.is_zero();
            norms.case(ok, || at(q));

            let by_definition = ctx.n() % s.m.value() == 0
                && (ctx.n() as i128 - ctx.a_prime() as i128).rem_euclid(s.k.value() as i128) == 0;
            let in_e = m.is_exceptional(q)?;
            exceptional.case(
                in_e == by_definition && kappa_n.is_zero() == by_definition,
                || at(q),
            );

            let (lo, hi) = (Rational::new(phi, 4), r(phi));
            let within = |v: &ScaledValue| *v.coeff() >= lo && *v.coeff() <= hi;
            // η*_q may vanish identically; all nonzero norms obey the bounds
            let ok = (eta_n.is_zero() || within(&eta_n)) && (in_e || within(&kappa_n));
            sandwich.case(ok, || format!("{}: {eta_n}, {kappa_n}", at(q)));
        }
        Ok(())
    }));
    Ok(out)
}

fn big(x: &Rational) -> BigRational {
    <BigRational as Scalar>::from_rational(x)
}

fn estimator_suite(b: &VerifyBounds) -> Result<Vec<CheckResult>> {
    let t = SieveTables::build(b.estimator_n_max.max(1000) * 4)?;
    let seeds: Vec<u64> = (0..b.random_cases as u64)
        .map(|i| b.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i))
        .collect();
    let mut out = Vec::new();

    out.push(check("adjoint_identity", &seeds, |&seed, tally| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = rng.gen_range(1..=40u64);
        let n = rng.gen_range(1..=300u64);
        let j = GlobalFn::from_fn(n, |_| {
            Rational::new(rng.gen_range(-50..=50), rng.gen_range(1..=6))
        });
        let h = LocalFn::new(
            q,
            (0..q)
                .map(|_| Rational::new(rng.gen_range(-50..=50), rng.gen_range(1..=6)))
                .collect(),
        )?;
        let lhs = delta(&j, q).product(&h)?;
        let rhs = global_product(&j, &nabla(&h, n))?;
        tally.case(lhs == rhs, || format!("seed {seed}: q = {q}, N = {n}"));
        Ok(())
    }));

    // one random context per seed: N, q', a', Q1 <= 6, Q2 <= 2
    let random_setup = |rng: &mut ChaCha8Rng| -> Result<(ProgressionContext, u64, u64)> {
        let n = rng.gen_range(50..=b.estimator_n_max.max(50));
        let qp = rng.gen_range(1..=12u64);
        let ap = loop {
            let a = rng.gen_range(1..=qp);
            if gcd(a, qp) == 1 {
                break a;
            }
        };
        Ok((
            ProgressionContext::new(n, ap as i64, qp)?,
            rng.gen_range(1..=6u64),
            rng.gen_range(1..=2u64),
        ))
    };

    out.push(check("almost_orthogonality", &seeds, |&seed, tally| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ctx, q1, q2) = random_setup(&mut rng)?;
        let m = LocalModel::new(ctx, &t);
        let est: Estimator<Rational> =
            Estimator::new(&m, build_moduli_set(q1, q2, &m)?, WeightMode::ExactCrossSum)?;
        let xi: Vec<BigRational> = (0..est.family().len())
            .map(|_| {
                big(&Rational::new(
                    rng.gen_range(-20..=20),
                    rng.gen_range(1..=5),
                ))
            })
            .collect();
        let n = ctx.n();
        let mut combo = vec![BigRational::from_integer(BigInt::from(0)); n as usize];
        for (x, v) in xi.iter().zip(est.family_locals()) {
            let g = nabla_local::<Rational>(v, n)?;
            for (c, val) in combo.iter_mut().zip(g.values()) {
                *c += x * big(val);
            }
        }
        let lhs: BigRational = combo.iter().map(|c| c * c).sum();
        let rhs: BigRational = xi
            .iter()
            .zip(est.weight_vector())
            .map(|(x, w)| big(w) * x * x)
            .sum();
        tally.case(lhs <= rhs, || {
            format!(
                "seed {seed}: N = {n}, q' = {}, Q1 = {q1}, Q2 = {q2}",
                ctx.q_prime()
            )
        });
        Ok(())
    }));

    out.push(check("bessel_nonnegative", &seeds, |&seed, tally| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ctx, q1, q2) = random_setup(&mut rng)?;
        let m = LocalModel::new(ctx, &t);
        let est: Estimator<BigRational> =
            Estimator::new(&m, build_moduli_set(q1, q2, &m)?, WeightMode::ExactCrossSum)?;
        let n = ctx.n();
        let random = GlobalFn::from_fn(n, |_| big(&r(rng.gen_range(-9..=9))));
        let indicator = GlobalFn::from_fn(n, |x| {
            let sf = t.is_squarefree(n - x);
            big(&r(sf as i128))
        });
        // f with Λ replaced by 1 on primes, exact
        let primes = GlobalFn::from_fn(n, |x| {
            let hit = t.is_prime(x) && x % ctx.q_prime() == ctx.a_prime() % ctx.q_prime();
            big(&r(hit as i128))
        });
        for (label, h) in [("random", &random), ("g", &indicator), ("f", &primes)] {
            let d = est.bessel_defect(h)?;
            tally.case(d >= BigRational::from_integer(BigInt::from(0)), || {
                format!("seed {seed}: h = {label}, N = {n}, Q1 = {q1}, Q2 = {q2}")
            });
        }
        Ok(())
    }));

    out.push(check("estimate_bilinear", &seeds, |&seed, tally| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ctx, q1, q2) = random_setup(&mut rng)?;
        let m = LocalModel::new(ctx, &t);
        let est: Estimator<BigRational> =
            Estimator::new(&m, build_moduli_set(q1, q2, &m)?, WeightMode::ExactCrossSum)?;
        let n = ctx.n();
        let mut draw = || GlobalFn::from_fn(n, |_| big(&r(rng.gen_range(-9..=9))));
        let (h1, h2, g) = (draw(), draw(), draw());
        let alpha = big(&Rational::new(rng.gen_range(-7..=7), rng.gen_range(1..=3)));
        let combo = h1.scale(&alpha).try_add(&h2)?;
        let lhs = est.inner(&combo, &g)?;
        let rhs = alpha * est.inner(&h1, &g)? + est.inner(&h2, &g)?;
        let sym = est.inner(&g, &h1)? == est.inner(&h1, &g)?;
        tally.case(lhs == rhs && sym, || format!("seed {seed}: N = {n}"));
        Ok(())
    }));

    let singles: Vec<u64> = vec![1, 2, 17, 100, 1000];
    out.push(check("rank_one_family", &singles, |&n, tally| {
        let m = LocalModel::new(ProgressionContext::new(n, 1, 1)?, &t);
        let est: Estimator<Rational> =
            Estimator::new(&m, build_moduli_set(1, 1, &m)?, WeightMode::ExactCrossSum)?;
        let h = GlobalFn::constant(n, r(5));
        let g = GlobalFn::from_fn(n, |x| r((x % 3) as i128));
        let inner = est.inner(&h, &g)?;
        let ok = est.weight_vector() == [r(n as i128)]
            && est.bessel_defect(&h)? == r(0)
            && inner == h.sum() * g.sum() / r(n as i128);
        tally.case(ok, || format!("N = {n}"));
        Ok(())
    }));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyBounds {
        VerifyBounds {
            r_max: 40,
            a_max: 60,
            mn_max: 30,
            q_max: 60,
            q_small_max: 40,
            q_average_max: 20,
            qp_max: 6,
            n_values: vec![100, 105],
            random_cases: 8,
            estimator_n_max: 300,
            seed: 1,
        }
    }

    #[test]
    fn small_suites_pass() {
        for suite in Suite::ALL {
            let report = run_suite(suite, &small(), &Hooks::default()).unwrap();
            assert!(report.passed(), "{report}");
        }
    }

    #[test]
    fn corrupted_t_factor_is_caught() {
        fn flipped(q: &FactoredInt) -> Rational {
            -crate::arith::t_factor(q)
        }
        let hooks = Hooks { t_factor: flipped };
        let report = run_suite(Suite::Local, &small(), &hooks).unwrap();
        assert!(!report.passed());
        assert!(report.failed_checks().contains(&"gamma_star_closed_form"));
    }
}
