//! Functions on `[1, N]`, the global product, and the adjoint pair
//! `∇_q` (periodize) / `Δ_q` (collect along progressions).

use rayon::prelude::*;

use crate::arith::{lcm, residue, Rational};
use crate::error::{Error, Result};
use crate::local::LocalVector;
use crate::scalar::Scalar;

/// A function on `[1, N]`; `values[i]` is the value at `n = i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalFn<T> {
    values: Vec<T>,
}

impl<T: Scalar> GlobalFn<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn from_fn(n: u64, f: impl FnMut(u64) -> T) -> Self {
        Self::new((1..=n).map(f).collect())
    }

    pub fn constant(n: u64, c: T) -> Self {
        Self::new(vec![c; n as usize])
    }

    /// `N`.
    pub fn len(&self) -> u64 {
        self.values.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at `1 <= n <= N`.
    pub fn at(&self, n: u64) -> &T {
        &self.values[(n - 1) as usize]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn scale(&self, c: &T) -> Self {
        Self::new(self.values.iter().map(|v| v.clone() * c.clone()).collect())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        if self.values.len() != other.values.len() {
            return Err(Error::LengthMismatch(self.values.len(), other.values.len()));
        }
        Ok(Self::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        ))
    }

    pub fn sum(&self) -> T {
        T::sum_iter(self.values.iter().cloned())
    }
}

/// A function on `Z/qZ` with entries in a generic scalar type.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFn<T> {
    modulus: u64,
    values: Vec<T>,
}

impl<T: Scalar> LocalFn<T> {
    pub fn new(modulus: u64, values: Vec<T>) -> Result<Self> {
        if modulus == 0 || values.len() as u64 != modulus {
            return Err(Error::LengthMismatch(values.len(), modulus as usize));
        }
        Ok(Self { modulus, values })
    }

    /// Converts an exact local vector; fails for exact scalar types when the
    /// vector still carries a power of `6/π²`.
    pub fn from_local(h: &LocalVector) -> Result<Self> {
        let values = (0..h.modulus() as i64)
            .map(|a| T::from_scaled(&h.get(a)).ok_or(Error::NotRepresentable(h.pi_power())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(h.modulus(), values)
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, a: i64) -> &T {
        &self.values[residue(a, self.modulus) as usize]
    }

    /// `[f|g]_q`.
    pub fn product(&self, other: &Self) -> Result<T> {
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch(self.modulus, other.modulus));
        }
        let sum = T::sum_iter(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.clone() * b.clone()),
        );
        Ok(sum / T::from_i64(self.modulus as i64))
    }
}

/// `∇_q(h)(x) = h(x mod q)` on `[1, N]`.
pub fn nabla<T: Scalar>(h: &LocalFn<T>, n: u64) -> GlobalFn<T> {
    GlobalFn::from_fn(n, |x| h.get(x as i64).clone())
}

/// `∇_q` applied to an exact local vector.
pub fn nabla_local<T: Scalar>(h: &LocalVector, n: u64) -> Result<GlobalFn<T>> {
    Ok(nabla(&LocalFn::from_local(h)?, n))
}

/// `Δ_q(j)(x) = q Σ_{n <= N, n ≡ x [q]} j(n)`.
pub fn delta<T: Scalar>(j: &GlobalFn<T>, q: u64) -> LocalFn<T> {
    let mut buckets: Vec<Vec<T>> = vec![Vec::new(); q as usize];
    for (i, v) in j.values.iter().enumerate() {
        buckets[((i as u64 + 1) % q) as usize].push(v.clone());
    }
    let qt = T::from_i64(q as i64);
    let values = buckets
        .into_iter()
        .map(|b| T::sum_iter(b) * qt.clone())
        .collect();
    LocalFn { modulus: q, values }
}

/// `[f|g] = Σ_{n <= N} f(n) g(n)`.
pub fn global_product<T: Scalar>(f: &GlobalFn<T>, g: &GlobalFn<T>) -> Result<T> {
    if f.values.len() != g.values.len() {
        return Err(Error::LengthMismatch(f.values.len(), g.values.len()));
    }
    Ok(T::sum_iter(
        f.values
            .iter()
            .zip(&g.values)
            .map(|(a, b)| a.clone() * b.clone()),
    ))
}

/// `[h|∇_q v]` by direct summation, without materializing `∇_q v`.
pub fn product_with_periodic<T: Scalar>(h: &GlobalFn<T>, v: &LocalFn<T>) -> T {
    let q = v.modulus as usize;
    T::sum_iter(
        h.values
            .iter()
            .enumerate()
            .map(|(i, x)| x.clone() * v.values[(i + 1) % q].clone()),
    )
}

/// `[∇_s u | ∇_t v]` over `[1, N]` for two rational vectors, reduced over
/// one period `lcm(s, t)` plus the incomplete final period.
pub fn periodic_product(u: &LocalVector, v: &LocalVector, n: u64) -> Result<Rational> {
    if u.pi_power() != 0 || v.pi_power() != 0 {
        return Err(Error::NotRepresentable(u.pi_power() + v.pi_power()));
    }
    let (s, t) = (u.modulus(), v.modulus());
    let l = lcm(s, t);
    let term = |x: u64| u.coeffs()[(x % s) as usize] * v.coeffs()[(x % t) as usize];
    let full = n / l;
    let rem = n % l;
    let mut period = Rational::from_integer(0);
    let mut head = Rational::from_integer(0);
    for x in 1..=l.min(n) {
        let val = term(x);
        if x <= rem {
            head += val;
        }
        period += val;
    }
    if full == 0 {
        return Ok(head);
    }
    Ok(period * full as i128 + head)
}

/// Gram matrix of `[∇ u_i | ∇ u_j]` for a family of rational vectors.
pub fn periodic_gram(family: &[LocalVector], n: u64) -> Result<Vec<Vec<Rational>>> {
    let k = family.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
    let entries = pairs
        .par_iter()
        .map(|&(i, j)| periodic_product(&family[i], &family[j], n))
        .collect::<Result<Vec<_>>>()?;
    let mut gram = vec![vec![Rational::from_integer(0); k]; k];
    for (&(i, j), e) in pairs.iter().zip(entries) {
        gram[i][j] = e;
        gram[j][i] = e;
    }
    Ok(gram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::SieveTables;
    use crate::local::{LocalModel, ProgressionContext};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ri(n: i64) -> Rational {
        Rational::from_integer(n as i128)
    }

    #[test]
    fn ones_and_counting() {
        let one = GlobalFn::constant(17, ri(1));
        assert_eq!(global_product(&one, &one).unwrap(), ri(17));
        let h = LocalFn::new(5, vec![ri(1); 5]).unwrap();
        assert_eq!(nabla(&h, 23), GlobalFn::constant(23, ri(1)));
        let d = delta(&GlobalFn::constant(23, ri(1)), 5);
        for x in 0..5u64 {
            let count = (1..=23u64).filter(|n| n % 5 == x).count() as i64;
            assert_eq!(d.get(x as i64), &ri(5 * count));
        }
        let h1 = GlobalFn::from_fn(23, |n| ri(n as i64 % 7 - 3));
        let lhs = delta(&h1, 5).product(&h).unwrap();
        let rhs = global_product(&h1, &nabla(&h, 23)).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn delta_mod_one_is_total() {
        let j = GlobalFn::from_fn(30, |n| ri(n as i64 * n as i64));
        let d = delta(&j, 1);
        assert_eq!(d.values(), &[j.sum()]);
    }

    #[test]
    fn adjoint_random_q4() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let j = GlobalFn::from_fn(12, |_| ri(rng.gen_range(-9..=9)));
        let h = LocalFn::new(4, (0..4).map(|_| ri(rng.gen_range(-9..=9))).collect()).unwrap();
        assert_eq!(
            delta(&j, 4).product(&h).unwrap(),
            global_product(&j, &nabla(&h, 12)).unwrap()
        );
    }

    #[test]
    fn mismatches() {
        let a = GlobalFn::constant(3, ri(1));
        let b = GlobalFn::constant(4, ri(1));
        assert_eq!(
            global_product(&a, &b).unwrap_err(),
            Error::LengthMismatch(3, 4)
        );
    }

    #[test]
    fn periodic_matches_direct() {
        let t = SieveTables::build(5000).unwrap();
        let m = LocalModel::new(ProgressionContext::new(997, 3, 4).unwrap(), &t);
        let qs = [1u64, 2, 3, 4, 6, 12, 20];
        let vecs: Vec<LocalVector> = qs.iter().map(|&q| m.eta_star(q).unwrap()).collect();
        for n in [1u64, 5, 59, 997] {
            for u in &vecs {
                for v in &vecs {
                    let direct = global_product(
                        &nabla_local::<Rational>(u, n).unwrap(),
                        &nabla_local::<Rational>(v, n).unwrap(),
                    )
                    .unwrap();
                    assert_eq!(periodic_product(u, v, n).unwrap(), direct);
                }
            }
        }
    }
}
