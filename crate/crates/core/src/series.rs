//! Truncated power series and the negative moments of `|λ − a|`.
//!
//! The negative moments come out of the compositional inverse of
//!
//! ```text
//! B_λ(z) = R_μ(z) + (1 − √(1 + 4λ²z²)) / (2z),
//! ```
//!
//! where `R_μ` is the R-transform of the symmetrized modulus of `a`:
//! `m_{−2k−2}(μ_λ) = −[w^{2k+1}] B_λ^{⟨−1⟩}(w)`. In the polynomial ring the
//! linear coefficient `1 − λ²` of `B_λ` is not a unit, so the symbolic route
//! expands the inverse over powers of that coefficient and returns rational
//! functions of `λ²`.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::cumulants::OperatorModel;
use crate::error::{arg, Error, Result};
use crate::nc::{catalan, fuss_catalan};
use crate::ring::{int, rat, rational_to_f64, Poly, RationalFunction, Scalar, LAMBDA2};

/// Declared symmetry of a series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    None,
}

/// `c₀ + c₁z + … + c_N z^N + O(z^{N+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct FormalSeries<S: Scalar> {
    coeffs: Vec<S>,
    parity: Parity,
}

impl<S: Scalar> FormalSeries<S> {
    /// Builds a series with `coeffs.len() − 1` as its order, checking parity.
    pub fn new(coeffs: Vec<S>, parity: Parity) -> Result<Self> {
        if coeffs.is_empty() {
            return arg("a series needs at least one coefficient");
        }
        let bad = match parity {
            Parity::Even => coeffs.iter().skip(1).step_by(2).any(|c| !c.is_zero()),
            Parity::Odd => coeffs.iter().step_by(2).any(|c| !c.is_zero()),
            Parity::None => false,
        };
        if bad {
            return arg(format!("coefficients violate declared {parity:?} parity"));
        }
        Ok(FormalSeries { coeffs, parity })
    }

    pub fn from_coeffs(coeffs: Vec<S>) -> Self {
        assert!(!coeffs.is_empty(), "a series needs at least one coefficient");
        FormalSeries { coeffs, parity: Parity::None }
    }

    /// The series `z`.
    pub fn identity(order: usize) -> Self {
        let mut c = vec![S::zero(); order + 1];
        if order >= 1 {
            c[1] = S::one();
        }
        FormalSeries { coeffs: c, parity: Parity::Odd }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> Option<&S> {
        self.coeffs.get(i)
    }

    /// Recomputes the parity flag from the coefficients.
    pub fn detect_parity(mut self) -> Self {
        let odd_zero = self.coeffs.iter().skip(1).step_by(2).all(|c| c.is_zero());
        let even_zero = self.coeffs.iter().step_by(2).all(|c| c.is_zero());
        self.parity = if even_zero {
            Parity::Odd
        } else if odd_zero {
            Parity::Even
        } else {
            Parity::None
        };
        self
    }

    pub fn truncate(&self, order: usize) -> Self {
        let n = order.min(self.order());
        FormalSeries { coeffs: self.coeffs[..=n].to_vec(), parity: self.parity }
    }

    fn combine_parity(a: Parity, b: Parity, product: bool) -> Parity {
        use Parity::*;
        match (a, b, product) {
            (x, y, false) if x == y => x,
            (Even, Even, true) | (Odd, Odd, true) => Even,
            (Even, Odd, true) | (Odd, Even, true) => Odd,
            _ => None,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.order().min(other.order());
        let coeffs = (0..=n).map(|i| self.coeffs[i].clone() + other.coeffs[i].clone()).collect();
        FormalSeries { coeffs, parity: Self::combine_parity(self.parity, other.parity, false) }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&S::from_i64(-1)))
    }

    pub fn scale(&self, c: &S) -> Self {
        FormalSeries { coeffs: self.coeffs.iter().map(|x| x.clone() * c.clone()).collect(), parity: self.parity }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.order().min(other.order());
        let mut out = vec![S::zero(); n + 1];
        for (i, a) in self.coeffs.iter().enumerate().take(n + 1) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(n + 1 - i) {
                if !b.is_zero() {
                    out[i + j] = out[i + j].clone() + a.clone() * b.clone();
                }
            }
        }
        FormalSeries { coeffs: out, parity: Self::combine_parity(self.parity, other.parity, true) }
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut acc = FormalSeries::from_coeffs({
            let mut c = vec![S::zero(); self.order() + 1];
            c[0] = S::one();
            c
        });
        acc.parity = Parity::Even;
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// `1 / f`, requiring an invertible constant term.
    pub fn reciprocal(&self) -> Result<Self> {
        let inv0 = self.coeffs[0]
            .inverse()
            .ok_or_else(|| Error::SingularInverse("constant term is not invertible".into()))?;
        let n = self.order();
        let mut out: Vec<S> = Vec::with_capacity(n + 1);
        out.push(inv0.clone());
        for k in 1..=n {
            let mut acc = S::zero();
            for j in 1..=k {
                if !self.coeffs[j].is_zero() {
                    acc = acc + self.coeffs[j].clone() * out[k - j].clone();
                }
            }
            out.push(-(acc * inv0.clone()));
        }
        let parity = if self.parity == Parity::Even { Parity::Even } else { Parity::None };
        Ok(FormalSeries { coeffs: out, parity })
    }

    /// `f(g(z))`, where `g(0) = 0`.
    pub fn compose(&self, g: &Self) -> Result<Self> {
        if !g.coeffs[0].is_zero() {
            return arg("inner series must vanish at 0");
        }
        let n = self.order().min(g.order());
        let g = g.truncate(n);
        // Horner from the top coefficient down
        let mut acc = FormalSeries::from_coeffs(vec![S::zero(); n + 1]);
        for c in self.coeffs[..=n].iter().rev() {
            acc = acc.mul(&g);
            acc.coeffs[0] = acc.coeffs[0].clone() + c.clone();
        }
        let parity = match (self.parity, g.parity) {
            (Parity::Odd, Parity::Odd) => Parity::Odd,
            (Parity::Even, Parity::Odd) => Parity::Even,
            _ => Parity::None,
        };
        Ok(FormalSeries { coeffs: acc.coeffs, parity })
    }

    fn check_invertible_shape(&self) -> Result<S> {
        if !self.coeffs[0].is_zero() {
            return arg("series to invert must vanish at 0");
        }
        if self.order() < 1 || self.coeffs[1].is_zero() {
            return Err(Error::SingularInverse("linear coefficient is zero".into()));
        }
        self.coeffs[1]
            .inverse()
            .ok_or_else(|| Error::SingularInverse("linear coefficient is not a unit in the coefficient ring".into()))
    }

    /// Compositional inverse by residues: `g_k = (1/k)[z^{k−1}](z/f)^k`.
    pub fn lagrange_invert(&self) -> Result<Self> {
        self.check_invertible_shape()?;
        let n = self.order();
        let f_over_z = FormalSeries::from_coeffs(self.coeffs[1..].to_vec());
        let base = f_over_z.reciprocal()?;
        let mut out = vec![S::zero(); n + 1];
        let mut power = base.pow(0);
        for k in 1..=n {
            power = power.mul(&base);
            let c = power.coeffs[k - 1].clone();
            out[k] = c * S::from_rational(&rat(1, k as i64));
        }
        let parity = if self.parity == Parity::Odd { Parity::Odd } else { Parity::None };
        FormalSeries::new(out, parity)
    }

    /// Compositional inverse by the fixed point `g ← g + (z − f∘g)/f₁`.
    pub fn invert_by_iteration(&self) -> Result<Self> {
        let inv1 = self.check_invertible_shape()?;
        let n = self.order();
        let id = Self::identity(n);
        let mut g = id.scale(&inv1);
        for _ in 0..n {
            let resid = id.sub(&self.compose(&g)?);
            g = g.add(&resid.scale(&inv1));
        }
        Ok(FormalSeries { coeffs: g.coeffs, parity: if self.parity == Parity::Odd { Parity::Odd } else { Parity::None } })
    }

    /// Evaluates the truncated sum at a point (numeric coefficients only).
    pub fn eval_with(&self, x: f64) -> f64
    where
        S: Into<f64> + Copy,
    {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c.into())
    }
}

/// Compositional inverse when `f₁` is not a unit: with `q = f/z − f₁`,
/// `g_n = (1/n) Σ_i binom(−n, i) f₁^{−n−i} [z^{n−1}] q^i`.
/// Returns `g₁ … g_N` as fractions with a power of `f₁` below.
pub fn lagrange_invert_fraction(f: &FormalSeries<Poly>) -> Result<Vec<RationalFunction>> {
    if !f.coeffs[0].is_zero() {
        return arg("series to invert must vanish at 0");
    }
    if f.order() < 1 || f.coeffs[1].is_zero() {
        return Err(Error::SingularInverse("linear coefficient is zero".into()));
    }
    let n_max = f.order();
    let c1 = f.coeffs[1].clone();
    let mut q_coeffs = f.coeffs[1..].to_vec();
    q_coeffs[0] = Poly::zero();
    let q = FormalSeries::from_coeffs(q_coeffs);
    // q^i for i = 0..n_max−1
    let mut q_pows = vec![q.pow(0)];
    for _ in 1..n_max {
        let next = q_pows.last().unwrap().mul(&q);
        q_pows.push(next);
    }
    let mut c1_pows = vec![Poly::one()];
    for _ in 0..2 * n_max {
        let next = c1_pows.last().unwrap() * &c1;
        c1_pows.push(next);
    }
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let terms: Vec<(usize, Poly)> = (0..n)
            .map(|i| (i, q_pows[i].coeffs[n - 1].clone()))
            .filter(|(_, c)| !c.is_zero())
            .collect();
        let Some(i_max) = terms.iter().map(|t| t.0).max() else {
            out.push(RationalFunction::from_poly(Poly::zero()));
            continue;
        };
        let mut numer = Poly::zero();
        for (i, c) in terms {
            let b = binomial_negative(n as i64, i as u64);
            numer += (&c * &c1_pows[i_max - i]).scale(&(b / int(n as i64)));
        }
        out.push(RationalFunction::new(numer, c1_pows[n + i_max].clone()));
    }
    Ok(out)
}

/// `binom(−n, i) = (−1)^i binom(n+i−1, i)`.
fn binomial_negative(n: i64, i: u64) -> BigRational {
    let b = num_integer::binomial(BigInt::from(n + i as i64 - 1), BigInt::from(i));
    let b = BigRational::from_integer(b);
    if i % 2 == 1 {
        -b
    } else {
        b
    }
}

/// `binom(1/2, j)`.
fn binomial_half(j: usize) -> BigRational {
    let mut b = int(1);
    let half = rat(1, 2);
    for i in 0..j {
        b = b * (half.clone() - int(i as i64)) / int(i as i64 + 1);
    }
    b
}

/// `√(1 + c z²)` through `z^order`, by the binomial series.
pub fn sqrt_one_plus<S: Scalar>(c: &S, order: usize) -> FormalSeries<S> {
    let mut coeffs = vec![S::zero(); order + 1];
    let mut cp = S::one();
    for j in 0..=order / 2 {
        coeffs[2 * j] = S::from_rational(&binomial_half(j)) * cp.clone();
        cp = cp * c.clone();
    }
    FormalSeries { coeffs, parity: Parity::Even }
}

/// `(1 − √(1 + 4λ²z²)) / (2z)` through `z^order`, with `lam2 = λ²`.
pub fn bernoulli_shift<S: Scalar>(lam2: &S, order: usize) -> FormalSeries<S> {
    let four_lam2 = S::from_i64(4) * lam2.clone();
    let root = sqrt_one_plus(&four_lam2, order + 1);
    let mut coeffs = vec![S::zero(); order + 1];
    let minus_half = S::from_rational(&rat(-1, 2));
    for (i, c) in coeffs.iter_mut().enumerate() {
        *c = root.coeffs[i + 1].clone() * minus_half.clone();
    }
    FormalSeries { coeffs, parity: Parity::Odd }
}

/// The same series written as `Σ_{ℓ≥1} (−1)^ℓ C_{ℓ−1} λ^{2ℓ} z^{2ℓ−1}`.
pub fn bernoulli_shift_catalan<S: Scalar>(lam2: &S, order: usize) -> FormalSeries<S> {
    let mut coeffs = vec![S::zero(); order + 1];
    let mut lp = lam2.clone();
    let mut l = 1;
    while 2 * l - 1 <= order {
        let c = BigRational::from_integer(BigInt::from(catalan(l as u64 - 1)));
        let signed = if l % 2 == 1 { -c } else { c };
        coeffs[2 * l - 1] = S::from_rational(&signed) * lp.clone();
        lp = lp * lam2.clone();
        l += 1;
    }
    FormalSeries { coeffs, parity: Parity::Odd }
}

/// `R_μ(z) = Σ_n κ_{2n}(μ) z^{2n−1}` through `z^order`.
pub fn r_transform_series<S: Scalar>(mu_even: &[S], order: usize) -> Result<FormalSeries<S>> {
    let mut coeffs = vec![S::zero(); order + 1];
    for n in 1..=order.div_ceil(2) {
        let c = mu_even
            .get(n - 1)
            .ok_or_else(|| Error::Argument(format!("R-transform needs κ_{}(μ), model stops earlier", 2 * n)))?;
        coeffs[2 * n - 1] = c.clone();
    }
    FormalSeries::new(coeffs, Parity::Odd)
}

/// `B_λ = R_μ + (1 − √(1+4λ²z²))/(2z)`.
pub fn build_b_lambda<S: Scalar>(r_mu: &FormalSeries<S>, lam2: &S, order: usize) -> Result<FormalSeries<S>> {
    let r = r_mu.clone().detect_parity();
    if r.parity != Parity::Odd {
        return arg("R_μ must be an odd series");
    }
    if r.coeffs.get(1) != Some(&S::one()) {
        return arg("R_μ must have linear coefficient κ₂(μ) = 1");
    }
    if r.order() < order {
        return arg(format!("R_μ known to order {}, {} requested", r.order(), order));
    }
    Ok(r.truncate(order).add(&bernoulli_shift(lam2, order)))
}

/// Order of the series needed for `m_{−2k−2}`: known modulo `z^{2k+3}`.
pub fn default_order(k: usize) -> usize {
    2 * k + 2
}

fn mu_prefix(model: &OperatorModel, k: usize) -> Result<Vec<BigRational>> {
    (1..=k + 1)
        .map(|n| {
            model
                .mu_cumulant(n)
                .ok_or_else(|| Error::Argument(format!("m_(-{}) needs κ_{}(μ), model stops earlier", 2 * k + 2, 2 * n)))
        })
        .collect()
}

fn neg_moment_from_inverse(g: &[RationalFunction], k: usize) -> RationalFunction {
    let gk = &g[2 * k];
    RationalFunction::new(-&gk.numer, gk.denom.clone())
}

/// `m_{−2k−2}(μ_λ)` as a rational function of `lam2`, `v` and `kappa6`,
/// `kappa8`, … with `κ₂(μ) = 1` and `κ₄(μ) = v − 1`.
pub fn negative_moment_symbolic(k: usize) -> Result<RationalFunction> {
    let mut mu = vec![Poly::one(), &Poly::var("v") - &Poly::one()];
    for n in 3..=k + 1 {
        mu.push(Poly::var(&format!("kappa{}", 2 * n)));
    }
    symbolic_from_mu(&mu, k)
}

fn symbolic_from_mu(mu: &[Poly], k: usize) -> Result<RationalFunction> {
    let order = default_order(k);
    let r = r_transform_series(mu, order)?;
    let b = build_b_lambda(&r, &Poly::var(LAMBDA2), order)?;
    let g = lagrange_invert_fraction(&b)?;
    Ok(neg_moment_from_inverse(&g, k))
}

/// `m_{−2k−2}(μ_λ)` for a concrete model, as a rational function of `lam2`.
pub fn negative_moment_exact(model: &OperatorModel, k: usize) -> Result<RationalFunction> {
    let mu: Vec<Poly> = mu_prefix(model, k)?.into_iter().map(Poly::constant).collect();
    symbolic_from_mu(&mu, k)
}

/// `m_{−2k−2}(μ_λ)` at a rational `λ > 1`, in exact arithmetic.
pub fn negative_moment_at(model: &OperatorModel, k: usize, lambda: &BigRational) -> Result<BigRational> {
    let lam2 = lambda * lambda;
    if lam2 <= int(1) {
        return arg("λ must exceed 1");
    }
    let order = default_order(k);
    let r = r_transform_series(&mu_prefix(model, k)?, order)?;
    let g = build_b_lambda(&r, &lam2, order)?.lagrange_invert()?;
    Ok(-g.coeffs[2 * k + 1].clone())
}

/// All of `m_{−2}, …, m_{−2k−2}` at a rational `λ`, sharing one inversion.
pub fn negative_moments_at(model: &OperatorModel, k: usize, lambda: &BigRational) -> Result<Vec<BigRational>> {
    let lam2 = lambda * lambda;
    if lam2 <= int(1) {
        return arg("λ must exceed 1");
    }
    let order = default_order(k);
    let r = r_transform_series(&mu_prefix(model, k)?, order)?;
    let g = build_b_lambda(&r, &lam2, order)?.lagrange_invert()?;
    Ok((0..=k).map(|j| -g.coeffs[2 * j + 1].clone()).collect())
}

/// `F_λ(x) = −(λ²−1)^{−3/2} B_λ(√(λ²−1)·x)` in double precision; its
/// linear coefficient is exactly 1.
pub fn f_lambda_series(model: &OperatorModel, lambda: f64, order: usize) -> Result<FormalSeries<f64>> {
    if !(lambda > 1.0) {
        return arg("λ must exceed 1");
    }
    let m = lambda * lambda - 1.0;
    let k = order.saturating_sub(1) / 2;
    let mu: Vec<f64> = mu_prefix(model, k)?.iter().map(rational_to_f64).collect();
    let r = r_transform_series(&mu, order)?;
    let b = build_b_lambda(&r, &(lambda * lambda), order)?;
    // coefficient of x^{2j+1} is −b_{2j+1} m^{j−1}
    let coeffs: Vec<f64> =
        b.coeffs.iter().enumerate().map(|(i, &c)| if i % 2 == 1 { -c * m.powi((i as i32 - 1) / 2 - 1) } else { 0.0 }).collect();
    FormalSeries::new(coeffs, Parity::Odd)
}

/// Coefficients `b^{(λ)}_{2j+1}` of `F_λ^{⟨−1⟩}`, `j = 0..=k`.
pub fn f_lambda_inverse_coefficients(model: &OperatorModel, lambda: f64, k: usize) -> Result<Vec<f64>> {
    let f = f_lambda_series(model, lambda, default_order(k))?;
    let g = f.lagrange_invert()?;
    Ok((0..=k).map(|j| g.coeffs[2 * j + 1]).collect())
}

/// `m_{−2k−2}(μ_λ) = (λ²−1)^{−(3k+1)} b^{(λ)}_{2k+1}`, in double precision.
pub fn negative_moment_numeric(model: &OperatorModel, k: usize, lambda: f64) -> Result<f64> {
    let b = f_lambda_inverse_coefficients(model, lambda, k)?;
    let m = lambda * lambda - 1.0;
    Ok(b[k] * m.powi(-(3 * k as i32 + 1)))
}

/// Leading order `C⁽²⁾_k v^k / (λ²−1)^{3k+1}` as `λ ↓ 1`.
pub fn asymptotic_negative_moment(v: f64, k: usize, lambda: f64) -> Result<f64> {
    if !(v > 0.0) {
        return arg("v(a) must be positive (the Haar-unitary case v = 0 is excluded)");
    }
    if !(lambda > 1.0) {
        return arg("λ must exceed 1");
    }
    let c: f64 = fuss_catalan(2, k as u64).to_string().parse().expect("integer renders as float");
    Ok(c * v.powi(k as i32) / (lambda * lambda - 1.0).powi(3 * k as i32 + 1))
}

/// Evaluates a rational function of `lam2` (and nothing else) at `λ`.
pub fn eval_at_lambda(r: &RationalFunction, lambda: &BigRational) -> Option<BigRational> {
    let env: HashMap<&str, BigRational> = [(LAMBDA2, lambda * lambda)].into_iter().collect();
    r.eval(&env)
}
