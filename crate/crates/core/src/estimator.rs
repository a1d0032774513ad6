//! The almost-orthogonal system `{∇η*_q : q ∈ Q} ∪ {∇κ*_q : q ∈ Q \ E}`,
//! its weights, and the bilinear estimator
//! `⟨h1|h2⟩ = Σ_i M_i^{-1} [h1|φ_i][φ_i|h2]` over the family.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Signed;
use rayon::prelude::*;

use crate::arith::{gcd, Rational};
use crate::error::{Error, Result};
use crate::global::{periodic_gram, product_with_periodic, GlobalFn, LocalFn};
use crate::local::{local_product, LocalModel, LocalVector};
use crate::scalar::Scalar;

/// Largest `N` for which estimator experiments materialize `[1, N]`.
pub const DEFAULT_MATERIALIZE_CAP: u64 = 10_000_000;

pub fn check_materialize(n: u64, cap: u64) -> Result<()> {
    if n > cap {
        return Err(Error::Capacity(format!(
            "N = {n} exceeds the materialization cap {cap}"
        )));
    }
    Ok(())
}

/// Cubefree moduli `q = q1 q2²` with `q1 <= Q1`, `q2 <= Q2`, `μ²(q1 q2) = 1`,
/// and the exceptional subset `E`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuliSet {
    q1_bound: u64,
    q2_bound: u64,
    members: Vec<u64>,
    exceptional: BTreeSet<u64>,
}

impl ModuliSet {
    pub fn q1_bound(&self) -> u64 {
        self.q1_bound
    }

    pub fn q2_bound(&self) -> u64 {
        self.q2_bound
    }

    /// Sorted ascending.
    pub fn members(&self) -> &[u64] {
        &self.members
    }

    pub fn exceptional(&self) -> &BTreeSet<u64> {
        &self.exceptional
    }

    pub fn is_exceptional(&self, q: u64) -> bool {
        self.exceptional.contains(&q)
    }

    /// `Q \ E`, ascending.
    pub fn regular(&self) -> impl Iterator<Item = u64> + '_ {
        self.members
            .iter()
            .copied()
            .filter(|q| !self.exceptional.contains(q))
    }
}

pub fn build_moduli_set(q1_bound: u64, q2_bound: u64, model: &LocalModel) -> Result<ModuliSet> {
    if q1_bound == 0 || q2_bound == 0 {
        return Err(Error::InvalidArgument(format!(
            "moduli bounds must be positive, got Q1 = {q1_bound}, Q2 = {q2_bound}"
        )));
    }
    let mut members = Vec::new();
    for q2 in (1..=q2_bound).filter(|&x| is_squarefree(x, model)) {
        for q1 in (1..=q1_bound).filter(|&x| is_squarefree(x, model)) {
            if gcd(q1, q2) == 1 {
                members.push(q1 * q2 * q2);
            }
        }
    }
    members.sort_unstable();
    let mut exceptional = BTreeSet::new();
    for &q in &members {
        if model.is_exceptional(q)? {
            exceptional.insert(q);
        }
    }
    Ok(ModuliSet {
        q1_bound,
        q2_bound,
        members,
        exceptional,
    })
}

fn is_squarefree(x: u64, model: &LocalModel) -> bool {
    model.factor(x).map(|f| f.is_squarefree()).unwrap_or(false)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WeightMode {
    /// `M_i = Σ_j |[φ_i|φ_j]|` over the whole family; by the Schur test the
    /// family is then almost orthogonal with these weights.
    #[default]
    ExactCrossSum,
    /// `M = N ‖η*_q‖² + C N^ε` (with `‖κ*_q‖²` for the second family).
    NormForm { c: f64, eps: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    pub m_phi: BTreeMap<u64, T>,
    pub m_psi: BTreeMap<u64, T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Kind {
    /// `φ*_q = ∇η*_q`.
    Phi,
    /// `ψ*_q = ∇κ*_q`.
    Psi,
}

#[derive(Debug, Clone)]
struct Member<T> {
    kind: Kind,
    q: u64,
    local: LocalVector,
    values: LocalFn<T>,
}

/// Per-modulus breakdown of an estimate, floats for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Breakdown {
    pub q: u64,
    pub exceptional: bool,
    pub eta_norm: f64,
    pub kappa_norm: f64,
    pub m_phi: Option<f64>,
    pub m_psi: Option<f64>,
    pub f_phi: Option<f64>,
    pub phi_g: Option<f64>,
    pub f_psi: Option<f64>,
    pub psi_g: Option<f64>,
    /// This modulus' share of `⟨f|g⟩`.
    pub contribution: f64,
    /// `N [η*|ρ*]_q`, the predicted main term of `[f|φ*_q]`.
    pub predicted_f_phi: f64,
    /// `N [η*|ϑ*]_q`, the predicted main term of `[φ*_q|g]`.
    pub predicted_phi_g: f64,
}

/// Projections `[h|φ_i]` of one global function onto the family, in family
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct Projections<T>(pub Vec<T>);

pub struct Estimator<'m, 't, T> {
    model: &'m LocalModel<'t>,
    n: u64,
    moduli: ModuliSet,
    null_eta: BTreeSet<u64>,
    family: Vec<Member<T>>,
    gram: Vec<Vec<Rational>>,
    weights: Vec<T>,
}

impl<'m, 't, T: Scalar> Estimator<'m, 't, T> {
    /// Builds the family on `[1, N]` for the context's `N`, its Gram
    /// matrix, and the weights.
    pub fn new(model: &'m LocalModel<'t>, moduli: ModuliSet, mode: WeightMode) -> Result<Self> {
        let n = model.context().n();
        let mut family = Vec::new();
        let mut null_eta = BTreeSet::new();
        for &q in moduli.members() {
            let local = model.eta_star(q)?;
            if local.norm_squared().is_zero() {
                null_eta.insert(q);
                continue;
            }
            let values = LocalFn::from_local(&local)?;
            family.push(Member {
                kind: Kind::Phi,
                q,
                local,
                values,
            });
        }
        for q in moduli.regular() {
            let local = model.kappa_star(q)?;
            let values = LocalFn::from_local(&local)?;
            family.push(Member {
                kind: Kind::Psi,
                q,
                local,
                values,
            });
        }
        let locals: Vec<LocalVector> = family.iter().map(|m| m.local.clone()).collect();
        let gram = periodic_gram(&locals, n)?;
        let weights = match mode {
            WeightMode::ExactCrossSum => gram
                .iter()
                .map(|row| {
                    let s = row
                        .iter()
                        .fold(Rational::from_integer(0), |acc, x| acc + x.abs());
                    T::from_rational(&s)
                })
                .collect::<Vec<T>>(),
            WeightMode::NormForm { c, eps } => {
                if !(c > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "norm-form weights need C > 0, got {c}"
                    )));
                }
                let pad = c * (n as f64).powf(eps);
                family
                    .iter()
                    .map(|m| {
                        let norm = m.local.norm_squared().coeff().to_owned();
                        let v = n as f64 * <Rational as Scalar>::to_f64(&norm) + pad;
                        T::from_f64(v).ok_or_else(|| {
                            Error::InvalidArgument(format!("weight {v} not representable"))
                        })
                    })
                    .collect::<Result<Vec<T>>>()?
            }
        };
        if let Some(i) = weights.iter().position(|w| *w <= T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "non-positive weight for q = {} at N = {n}",
                family[i].q
            )));
        }
        Ok(Self {
            model,
            n,
            moduli,
            null_eta,
            family,
            gram,
            weights,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn moduli(&self) -> &ModuliSet {
        &self.moduli
    }

    /// Moduli whose `η*_q` vanishes identically; their `φ*_q` is left out
    /// of the family. This happens exactly when
    /// `c_m(N) c_k(N - a') = -φ(q)`, which needs the prime 2.
    pub fn null_eta(&self) -> &BTreeSet<u64> {
        &self.null_eta
    }

    /// `(kind, q)` in family order: `Q` minus the null `η*` moduli for
    /// `φ*`, then `Q \ E` for `ψ*`.
    pub fn family(&self) -> Vec<(Kind, u64)> {
        self.family.iter().map(|m| (m.kind, m.q)).collect()
    }

    pub fn family_locals(&self) -> Vec<&LocalVector> {
        self.family.iter().map(|m| &m.local).collect()
    }

    /// `[φ_i|φ_j]` in family order.
    pub fn gram(&self) -> &[Vec<Rational>] {
        &self.gram
    }

    /// Weights in family order.
    pub fn weight_vector(&self) -> &[T] {
        &self.weights
    }

    pub fn weights(&self) -> Weights<T> {
        let mut w = Weights {
            m_phi: BTreeMap::new(),
            m_psi: BTreeMap::new(),
        };
        for (m, v) in self.family.iter().zip(&self.weights) {
            match m.kind {
                Kind::Phi => w.m_phi.insert(m.q, v.clone()),
                Kind::Psi => w.m_psi.insert(m.q, v.clone()),
            };
        }
        w
    }

    fn check_len(&self, h: &GlobalFn<T>) -> Result<()> {
        if h.len() != self.n {
            return Err(Error::LengthMismatch(h.len() as usize, self.n as usize));
        }
        Ok(())
    }

    /// `[h|φ_i]` by direct summation over `n <= N`.
    pub fn project(&self, h: &GlobalFn<T>) -> Result<Projections<T>> {
        self.check_len(h)?;
        Ok(Projections(
            self.family
                .par_iter()
                .map(|m| product_with_periodic(h, &m.values))
                .collect(),
        ))
    }

    pub fn inner_from(&self, p1: &Projections<T>, p2: &Projections<T>) -> T {
        T::sum_iter(
            p1.0.iter()
                .zip(&p2.0)
                .zip(&self.weights)
                .map(|((a, b), w)| a.clone() * b.clone() / w.clone()),
        )
    }

    /// `⟨h1|h2⟩`.
    pub fn inner(&self, h1: &GlobalFn<T>, h2: &GlobalFn<T>) -> Result<T> {
        Ok(self.inner_from(&self.project(h1)?, &self.project(h2)?))
    }

    /// `[h|h] - ⟨h|h⟩`, non-negative under exact cross-sum weights.
    pub fn bessel_defect(&self, h: &GlobalFn<T>) -> Result<T> {
        let p = self.project(h)?;
        let hh = T::sum_iter(h.values().iter().map(|x| x.clone() * x.clone()));
        Ok(hh - self.inner_from(&p, &p))
    }

    /// Per-modulus rows of `⟨f|g⟩`, ascending in `q`.
    pub fn breakdown(&self, pf: &Projections<T>, pg: &Projections<T>) -> Result<Vec<Breakdown>> {
        let n = self.n as f64;
        let mut rows: BTreeMap<u64, Breakdown> = BTreeMap::new();
        for &q in self.moduli.members() {
            let eta = self.model.eta_star(q)?;
            let rho = self.model.rho_star_vector(q)?;
            let theta = self.model.theta_star_vector(q)?;
            rows.insert(
                q,
                Breakdown {
                    q,
                    exceptional: self.moduli.is_exceptional(q),
                    eta_norm: eta.norm_squared().to_f64(),
                    kappa_norm: self.model.kappa_star(q)?.norm_squared().to_f64(),
                    m_phi: None,
                    m_psi: None,
                    f_phi: None,
                    phi_g: None,
                    f_psi: None,
                    psi_g: None,
                    contribution: 0.0,
                    predicted_f_phi: n * local_product(&eta, &rho)?.to_f64(),
                    predicted_phi_g: n * local_product(&eta, &theta)?.to_f64(),
                },
            );
        }
        for (i, m) in self.family.iter().enumerate() {
            let row = rows.get_mut(&m.q).expect("family moduli lie in Q");
            let w = Some(self.weights[i].to_f64());
            let (fp, gp) = (Some(pf.0[i].to_f64()), Some(pg.0[i].to_f64()));
            match m.kind {
                Kind::Phi => (row.m_phi, row.f_phi, row.phi_g) = (w, fp, gp),
                Kind::Psi => (row.m_psi, row.f_psi, row.psi_g) = (w, fp, gp),
            }
            row.contribution +=
                (pf.0[i].clone() * pg.0[i].clone() / self.weights[i].clone()).to_f64();
        }
        Ok(rows.into_values().collect())
    }
}
