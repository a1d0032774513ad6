//! Local models on `Z/qZ`.
//!
//! Every value here is exact: [`ScaledValue`] keeps the transcendental
//! factor `6/π²` as a formal exponent, so identities between local models
//! reduce to equalities of rationals. Residues are always canonicalized to
//! `[0, q)`.

use std::fmt;

use crate::arith::{
    cubefree_split, euler_phi, gcd, lcm, mobius, ramanujan_sum, residue, t_factor, FactoredInt,
    Rational, SieveTables,
};
use crate::error::{Error, Result};

/// `6/π²` to double precision.
pub const SIX_OVER_PI_SQUARED: f64 = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);

/// The fixed data `(N, a', q')` with `(a', q') = 1` shared by every local
/// model of one computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProgressionContext {
    n: u64,
    a_prime: u64,
    q_prime: u64,
}

impl ProgressionContext {
    /// `a_prime` is reduced into `[1, q']`.
    pub fn new(n: u64, a_prime: i64, q_prime: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("N must be positive".into()));
        }
        if q_prime == 0 {
            return Err(Error::InvalidArgument("q' must be positive".into()));
        }
        let mut a = residue(a_prime, q_prime);
        if a == 0 {
            a = q_prime;
        }
        if gcd(a, q_prime) != 1 {
            return Err(Error::NotCoprime {
                a: a_prime,
                q: q_prime,
            });
        }
        Ok(Self {
            n,
            a_prime: a,
            q_prime,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn a_prime(&self) -> u64 {
        self.a_prime
    }

    pub fn q_prime(&self) -> u64 {
        self.q_prime
    }
}

/// An exact rational times `(6/π²)^k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScaledValue {
    coeff: Rational,
    pi_power: i32,
}

impl ScaledValue {
    pub fn new(coeff: Rational, pi_power: i32) -> Self {
        Self { coeff, pi_power }
    }

    pub fn rational(coeff: Rational) -> Self {
        Self::new(coeff, 0)
    }

    pub fn zero(pi_power: i32) -> Self {
        Self::new(Rational::from_integer(0), pi_power)
    }

    pub fn coeff(&self) -> &Rational {
        &self.coeff
    }

    pub fn pi_power(&self) -> i32 {
        self.pi_power
    }

    pub fn is_zero(&self) -> bool {
        self.coeff == Rational::from_integer(0)
    }

    /// Addition is only defined between equal powers of `6/π²`.
    pub fn try_add(&self, other: &ScaledValue) -> Result<ScaledValue> {
        if self.pi_power != other.pi_power {
            return Err(Error::PiPowerMismatch(self.pi_power, other.pi_power));
        }
        Ok(Self::new(self.coeff + other.coeff, self.pi_power))
    }

    pub fn try_sub(&self, other: &ScaledValue) -> Result<ScaledValue> {
        self.try_add(&other.scale(Rational::from_integer(-1)))
    }

    pub fn mul(&self, other: &ScaledValue) -> ScaledValue {
        Self::new(self.coeff * other.coeff, self.pi_power + other.pi_power)
    }

    pub fn scale(&self, factor: Rational) -> ScaledValue {
        Self::new(self.coeff * factor, self.pi_power)
    }

    pub fn to_f64(&self) -> f64 {
        let c = *self.coeff.numer() as f64 / *self.coeff.denom() as f64;
        c * SIX_OVER_PI_SQUARED.powi(self.pi_power)
    }
}

impl fmt::Display for ScaledValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pi_power {
            0 => write!(f, "{}", self.coeff),
            k => write!(f, "{}*(6/pi^2)^{}", self.coeff, k),
        }
    }
}

/// A real function on `Z/qZ` whose entries share one power of `6/π²`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalVector {
    modulus: u64,
    pi_power: i32,
    coeffs: Vec<Rational>,
}

impl LocalVector {
    pub fn new(modulus: u64, pi_power: i32, coeffs: Vec<Rational>) -> Result<Self> {
        if modulus == 0 || coeffs.len() as u64 != modulus {
            return Err(Error::LengthMismatch(coeffs.len(), modulus as usize));
        }
        Ok(Self {
            modulus,
            pi_power,
            coeffs,
        })
    }

    /// Collects scaled entries, checking they share one power of `6/π²`.
    pub fn from_values(modulus: u64, values: Vec<ScaledValue>) -> Result<Self> {
        let pi_power = values.first().map_or(0, |v| v.pi_power);
        if let Some(bad) = values.iter().find(|v| v.pi_power != pi_power) {
            return Err(Error::PiPowerMismatch(pi_power, bad.pi_power));
        }
        Self::new(
            modulus,
            pi_power,
            values.into_iter().map(|v| v.coeff).collect(),
        )
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn pi_power(&self) -> i32 {
        self.pi_power
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    /// Entry at any integer, reduced modulo `q`.
    pub fn get(&self, a: i64) -> ScaledValue {
        ScaledValue::new(
            self.coeffs[residue(a, self.modulus) as usize],
            self.pi_power,
        )
    }

    pub fn scale(&self, factor: &ScaledValue) -> LocalVector {
        LocalVector {
            modulus: self.modulus,
            pi_power: self.pi_power + factor.pi_power,
            coeffs: self.coeffs.iter().map(|c| c * factor.coeff).collect(),
        }
    }

    pub fn try_add(&self, other: &LocalVector) -> Result<LocalVector> {
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch(self.modulus, other.modulus));
        }
        if self.pi_power != other.pi_power {
            return Err(Error::PiPowerMismatch(self.pi_power, other.pi_power));
        }
        Ok(LocalVector {
            modulus: self.modulus,
            pi_power: self.pi_power,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn try_sub(&self, other: &LocalVector) -> Result<LocalVector> {
        self.try_add(&other.scale(&ScaledValue::rational(Rational::from_integer(-1))))
    }

    /// Local Hermitian product `[f|g]_q = (1/q) Σ_{a mod q} f(a) g(a)`.
    pub fn product(&self, other: &LocalVector) -> Result<ScaledValue> {
        local_product(self, other)
    }

    pub fn norm_squared(&self) -> ScaledValue {
        local_product(self, self).expect("same modulus")
    }
}

/// `[f|g]_q`; entries are real so conjugation is the identity.
pub fn local_product(f: &LocalVector, g: &LocalVector) -> Result<ScaledValue> {
    if f.modulus != g.modulus {
        return Err(Error::ModulusMismatch(f.modulus, g.modulus));
    }
    let sum = f
        .coeffs
        .iter()
        .zip(&g.coeffs)
        .fold(Rational::from_integer(0), |acc, (a, b)| acc + a * b);
    Ok(ScaledValue::new(
        sum / f.modulus as i128,
        f.pi_power + g.pi_power,
    ))
}

/// The decomposition `q = q1 q2²` together with the two moduli
/// `m = q1/(q1,q')` and `k = (q1,q') q2²` that recur in the closed forms.
#[derive(Debug, Clone)]
pub struct ModulusSplit {
    pub q: FactoredInt,
    pub q1: FactoredInt,
    pub q2: FactoredInt,
    /// `q1 / (q1, q')`
    pub m: FactoredInt,
    /// `(q1, q') q2²`
    pub k: FactoredInt,
}

impl ModulusSplit {
    pub fn q2_squared_divides_q_prime(&self, q_prime: u64) -> bool {
        let q2 = self.q2.value();
        q_prime % (q2 * q2) == 0
    }

    /// μ(m); always ±1 since `m` is square-free.
    pub fn mu_m(&self) -> i128 {
        let mu = mobius(&self.m);
        assert!(mu != 0, "q1/(q1,q') must be square-free");
        mu as i128
    }
}

/// Exact local models for one [`ProgressionContext`].
///
/// Moduli are factored through the borrowed [`SieveTables`], which must
/// cover `lcm(q, q')` for every modulus queried.
#[derive(Debug, Clone, Copy)]
pub struct LocalModel<'t> {
    ctx: ProgressionContext,
    tables: &'t SieveTables,
}

/// Divisor `d` of `q` with `μ(q/d)`, `(d, q')` and `d/φ([d, q'])`.
struct RhoTerm {
    d: u64,
    mu: i8,
    g: u64,
    value: Rational,
}

impl<'t> LocalModel<'t> {
    pub fn new(ctx: ProgressionContext, tables: &'t SieveTables) -> Self {
        Self { ctx, tables }
    }

    pub fn context(&self) -> &ProgressionContext {
        &self.ctx
    }

    pub fn tables(&self) -> &'t SieveTables {
        self.tables
    }

    pub fn factor(&self, n: u64) -> Result<FactoredInt> {
        self.tables.factorize(n)
    }

    fn cubefree(&self, q: u64) -> Result<FactoredInt> {
        let f = self.factor(q)?;
        if !f.is_cubefree() {
            return Err(Error::NotCubefree(q));
        }
        Ok(f)
    }

    fn phi_q_prime(&self) -> i128 {
        euler_phi(&self.factor(self.ctx.q_prime).expect("q' factors")) as i128
    }

    pub fn split(&self, q: u64) -> Result<ModulusSplit> {
        let qf = self.cubefree(q)?;
        let (q1, q2) = cubefree_split(&qf)?;
        let g = gcd(q1.value(), self.ctx.q_prime);
        let m = q1.divisor(q1.value() / g)?;
        let k = qf.divisor(g * q2.value() * q2.value())?;
        Ok(ModulusSplit {
            q: qf,
            q1,
            q2,
            m,
            k,
        })
    }

    /// Density of square-free integers in the class `a` mod `q`, for any
    /// modulus: 0 if some `p² | (a, q)`, otherwise
    /// `(6/π²) ∏_{p|q} p²/(p²-1) ∏_{p∥q, p|a} (1 - 1/p)`.
    pub fn squarefree_density(&self, q: u64, a: i64) -> Result<ScaledValue> {
        let qf = self.factor(q)?;
        Ok(squarefree_density(&qf, a))
    }

    /// `γ_q(a)` for cubefree `q`.
    pub fn gamma_q(&self, q: u64, a: i64) -> Result<ScaledValue> {
        let qf = self.cubefree(q)?;
        Ok(squarefree_density(&qf, a))
    }

    /// `γ*_q(a) = Σ_{d|q} μ(q/d) γ_d(a)`; zero when `q` has a cubic factor.
    pub fn gamma_star(&self, q: u64, a: i64) -> Result<ScaledValue> {
        let qf = self.factor(q)?;
        if !qf.is_cubefree() {
            return Ok(ScaledValue::zero(1));
        }
        let mut acc = ScaledValue::zero(1);
        for d in qf.divisors() {
            let mu = mobius(&qf.divisor(q / d)?);
            if mu == 0 {
                continue;
            }
            let term =
                squarefree_density(&qf.divisor(d)?, a).scale(Rational::from_integer(mu as i128));
            acc = acc.try_add(&term)?;
        }
        Ok(acc)
    }

    pub fn gamma_star_vector(&self, q: u64) -> Result<LocalVector> {
        let values = (0..q as i64)
            .map(|a| self.gamma_star(q, a))
            .collect::<Result<Vec<_>>>()?;
        LocalVector::from_values(q, values)
    }

    /// `ϑ*_q(a) = γ*_q(N - a)`.
    pub fn theta_star(&self, q: u64, a: i64) -> Result<ScaledValue> {
        let shifted = (self.ctx.n % q) as i64 - residue(a, q) as i64;
        self.gamma_star(q, shifted)
    }

    pub fn theta_star_vector(&self, q: u64) -> Result<LocalVector> {
        let gamma = self.gamma_star_vector(q)?;
        let nq = (self.ctx.n % q) as i64;
        let coeffs = (0..q as i64)
            .map(|a| gamma.coeffs[residue(nq - a, q) as usize])
            .collect();
        LocalVector::new(q, gamma.pi_power, coeffs)
    }

    /// `ρ_q(a)`: `q/φ([q,q'])` when `(a,q) = 1` and `(q,q') | (a - a')`,
    /// else 0.
    pub fn rho_q(&self, q: u64, a: i64) -> Result<Rational> {
        self.cubefree(q)?;
        let term = self.rho_term(q, 1)?;
        Ok(self.rho_term_at(&term, a))
    }

    fn rho_term(&self, d: u64, mu: i8) -> Result<RhoTerm> {
        let qp = self.ctx.q_prime;
        let phi_l = euler_phi(&self.factor(lcm(d, qp))?) as i128;
        Ok(RhoTerm {
            d,
            mu,
            g: gcd(d, qp),
            value: Rational::new(d as i128, phi_l),
        })
    }

    fn rho_term_at(&self, term: &RhoTerm, a: i64) -> Rational {
        let ad = residue(a, term.d);
        let diff = a as i128 - self.ctx.a_prime as i128;
        if gcd(ad, term.d) == 1 && diff.rem_euclid(term.g as i128) == 0 {
            term.value
        } else {
            Rational::from_integer(0)
        }
    }

    fn rho_star_terms(&self, q: u64) -> Result<Vec<RhoTerm>> {
        let qf = self.cubefree(q)?;
        let mut terms = Vec::new();
        for d in qf.divisors() {
            let mu = mobius(&qf.divisor(q / d)?);
            if mu != 0 {
                terms.push(self.rho_term(d, mu)?);
            }
        }
        Ok(terms)
    }

    pub fn rho_vector(&self, q: u64) -> Result<LocalVector> {
        self.cubefree(q)?;
        let term = self.rho_term(q, 1)?;
        let coeffs = (0..q as i64).map(|a| self.rho_term_at(&term, a)).collect();
        LocalVector::new(q, 0, coeffs)
    }

    /// `ρ*_q(a) = Σ_{d|q} μ(q/d) ρ_d(a)`.
    pub fn rho_star(&self, q: u64, a: i64) -> Result<Rational> {
        let terms = self.rho_star_terms(q)?;
        Ok(self.rho_star_at(&terms, a))
    }

    fn rho_star_at(&self, terms: &[RhoTerm], a: i64) -> Rational {
        terms.iter().fold(Rational::from_integer(0), |acc, t| {
            acc + self.rho_term_at(t, a) * t.mu as i128
        })
    }

    pub fn rho_star_vector(&self, q: u64) -> Result<LocalVector> {
        let terms = self.rho_star_terms(q)?;
        let coeffs = (0..q as i64).map(|a| self.rho_star_at(&terms, a)).collect();
        LocalVector::new(q, 0, coeffs)
    }

    /// `μ(m) c_m(a) c_k(a - a') / (φ(q') φ(m))`, i.e. the closed form of
    /// `ρ*_q` without the `q2² | q'` indicator.
    pub fn rho_tilde_star(&self, q: u64, a: i64) -> Result<Rational> {
        let s = self.split(q)?;
        Ok(self.rho_tilde_at(&s, a))
    }

    fn rho_tilde_at(&self, s: &ModulusSplit, a: i64) -> Rational {
        let num = s.mu_m()
            * ramanujan_sum(&s.m, a) as i128
            * ramanujan_sum(&s.k, a - self.ctx.a_prime as i64) as i128;
        Rational::new(num, self.phi_q_prime() * euler_phi(&s.m) as i128)
    }

    pub fn rho_tilde_star_vector(&self, q: u64) -> Result<LocalVector> {
        let s = self.split(q)?;
        let coeffs = (0..q as i64).map(|a| self.rho_tilde_at(&s, a)).collect();
        LocalVector::new(q, 0, coeffs)
    }

    fn eta_kappa(&self, q: u64, sign: i128) -> Result<LocalVector> {
        let s = self.split(q)?;
        let t = t_factor(&s.q);
        // π²/(6 t(q)) ϑ*_q has no residual power of 6/π²
        let theta = self
            .theta_star_vector(q)?
            .scale(&ScaledValue::new(t.recip(), -1));
        let weight = Rational::new(self.phi_q_prime() * euler_phi(&s.m) as i128, s.mu_m());
        let rho = self
            .rho_tilde_star_vector(q)?
            .scale(&ScaledValue::rational(weight * sign));
        let out = theta
            .try_add(&rho)?
            .scale(&ScaledValue::rational(Rational::new(1, 2)));
        debug_assert_eq!(out.pi_power, 0);
        debug_assert!((0..q as i64).all(|a| {
            let n = self.ctx.n as i64;
            let simplified = ramanujan_sum(&s.q, n - a) as i128
                + sign
                    * ramanujan_sum(&s.m, a) as i128
                    * ramanujan_sum(&s.k, a - self.ctx.a_prime as i64) as i128;
            out.coeffs[a as usize] == Rational::new(simplified, 2)
        }));
        Ok(out)
    }

    /// `η*_q = ½(π²/(6t(q)) ϑ*_q + φ(q')φ(m)/μ(m) ρ̃*_q)`, a pure rational
    /// vector.
    pub fn eta_star(&self, q: u64) -> Result<LocalVector> {
        self.eta_kappa(q, 1)
    }

    /// `κ*_q`, as `η*_q` with the minus sign.
    pub fn kappa_star(&self, q: u64) -> Result<LocalVector> {
        self.eta_kappa(q, -1)
    }

    /// `b(q) = Σ*_r e_q(rN) Σ_a φ(q')ρ*_q(a) e_q(-ra)`. The inner
    /// exponential sums collapse to `Σ_a φ(q')ρ*_q(a) c_q(N - a)`.
    pub fn b_of_q(&self, q: u64) -> Result<Rational> {
        let qf = self.cubefree(q)?;
        let rho = self.rho_star_vector(q)?;
        let phi = self.phi_q_prime();
        let n = (self.ctx.n % q) as i64;
        Ok(rho
            .coeffs
            .iter()
            .enumerate()
            .fold(Rational::from_integer(0), |acc, (a, r)| {
                acc + r * phi * ramanujan_sum(&qf, n - a as i64) as i128
            }))
    }

    /// `q ∈ E` iff `m | N` and `k | (N - a')`, equivalently `‖κ*_q‖ = 0`.
    pub fn is_exceptional(&self, q: u64) -> Result<bool> {
        let s = self.split(q)?;
        let n = self.ctx.n as i128;
        let k = s.k.value() as i128;
        Ok(self.ctx.n % s.m.value() == 0 && (n - self.ctx.a_prime as i128).rem_euclid(k) == 0)
    }
}

fn squarefree_density(q: &FactoredInt, a: i64) -> ScaledValue {
    let mut coeff = Rational::from_integer(1);
    for &(p, e) in q.factors() {
        let ap = residue(a, p) == 0;
        if e >= 2 && residue(a, p * p) == 0 {
            return ScaledValue::zero(1);
        }
        let pp = (p * p) as i128;
        coeff *= Rational::new(pp, pp - 1);
        if e == 1 && ap {
            coeff *= Rational::new(p as i128 - 1, p as i128);
        }
    }
    ScaledValue::new(coeff, 1)
}
