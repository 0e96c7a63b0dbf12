//! Spectrum of `|λ − c|²` for a circular operator `c` of unit variance.
//!
//! Everything follows from the K-transform `K_m(z) = (1 + mz)/(z(1 − z)²)`
//! with `m = λ² − 1`, the functional inverse of the Cauchy transform `G_m`.
//! Solving `K_m(z) = w` is a cubic; the right root is picked by continuation
//! from `z ≈ 1/w` at large `|w|`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::cumulants::{circular_shift_cumulants, moments_from_cumulant_sequence, cumulants_from_moments};
use crate::error::{arg, Error, Result};
use crate::measure::{QuadratureRule, SpectralMeasure};
use crate::ring::{int, Poly, LAMBDA2};
use crate::series::bernoulli_shift;

/// Critical points and support edges of `|λ − c|²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircularSpectrum {
    pub lambda: f64,
    pub m: f64,
    pub z_minus: f64,
    pub z_plus: f64,
    pub s_minus: f64,
    pub s_plus: f64,
}

impl CircularSpectrum {
    pub fn new(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let m = lambda * lambda - 1.0;
        let r = (9.0 + 8.0 * m).sqrt();
        // written to avoid cancellation in z⁺ as m → 0
        let z_plus = 2.0 / (3.0 + r);
        let z_minus = (-3.0 - r) / (4.0 * m);
        let (s_minus, s_plus) = endpoints(m);
        Ok(CircularSpectrum { lambda, m, z_minus, z_plus, s_minus, s_plus })
    }

    pub fn width(&self) -> f64 {
        self.s_plus - self.s_minus
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 1.0) || !lambda.is_finite() {
        return arg(format!("λ = {lambda} must be a finite number greater than 1"));
    }
    Ok(())
}

fn endpoints(m: f64) -> (f64, f64) {
    let a = 27.0 + 36.0 * m + 8.0 * m * m;
    let b = (9.0 + 8.0 * m).powf(1.5);
    // (a − b)(a + b) = 64 m³ (m + 1), so the lower edge needs no subtraction
    let s_minus = 8.0 * m * m * m / (a + b);
    let s_plus = (a + b) / (8.0 * (m + 1.0));
    (s_minus, s_plus)
}

/// `K_m(z) = (1 + mz)/(z(1 − z)²)`.
pub fn k_transform(z: Complex64, m: f64) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    if z == Complex64::new(0.0, 0.0) || z == one {
        return Err(Error::Pole(format!("K_m has poles at 0 and 1, got {z}")));
    }
    Ok((one + z * m) / (z * (one - z) * (one - z)))
}

/// `1/z + 1/(1 − z) + λ²/(1 − z)²`, the same function written as a sum.
pub fn k_transform_summed(z: Complex64, m: f64) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    if z == Complex64::new(0.0, 0.0) || z == one {
        return Err(Error::Pole(format!("K_m has poles at 0 and 1, got {z}")));
    }
    Ok(one / z + one / (one - z) + (m + 1.0) / ((one - z) * (one - z)))
}

/// `(s⁻, s⁺)`, the edges of the spectrum of `|λ − c|²`.
pub fn support_endpoints(lambda: f64) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    Ok(endpoints(lambda * lambda - 1.0))
}

/// `inf spec |λ − c|² = (8λ⁴ + 20λ² − 1 − (8λ² + 1)^{3/2}) / 8`, evaluated
/// in a cancellation-free form.
pub fn inf_spec(lambda: f64) -> Result<f64> {
    support_endpoints(lambda).map(|s| s.0)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Roots of the numerator `1 − 3z − 2mz²` of `K_m′`, found by bisection.
pub fn critical_points_numeric(m: f64) -> Result<(f64, f64)> {
    if !(m > 0.0) {
        return arg("m = λ² − 1 must be positive");
    }
    let num = |z: f64| 1.0 - 3.0 * z - 2.0 * m * z * z;
    let z_plus = bisect(0.0, 1.0, num);
    let vertex = -3.0 / (4.0 * m);
    let mut far = 2.0 * vertex;
    while num(far) > 0.0 {
        far *= 2.0;
    }
    let z_minus = bisect(far, vertex, num);
    Ok((z_minus, z_plus))
}

/// Support edges via the numeric critical points.
pub fn support_endpoints_numeric(lambda: f64) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    let m = lambda * lambda - 1.0;
    let (zm, zp) = critical_points_numeric(m)?;
    let k = |z: f64| k_transform(Complex64::new(z, 0.0), m).map(|c| c.re);
    Ok((k(zm)?, k(zp)?))
}

/// The three roots of `z³ + az² + bz + c` by Cardano's formula, each
/// polished by Newton steps.
pub fn cubic_roots(a: Complex64, b: Complex64, c: Complex64) -> [Complex64; 3] {
    let third = 1.0 / 3.0;
    let p = b - a * a * third;
    let q = a * a * a * (2.0 / 27.0) - a * b * third + c;
    let sq = (q * q * 0.25 + p * p * p / 27.0).sqrt();
    let mut u3 = -q * 0.5 + sq;
    let alt = -q * 0.5 - sq;
    if alt.norm() > u3.norm() {
        u3 = alt;
    }
    let shift = -a * third;
    let mut roots = if u3.norm() == 0.0 {
        [shift; 3]
    } else {
        let u = u3.powf(third);
        let omega = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        let mut r = [Complex64::new(0.0, 0.0); 3];
        let mut uk = u;
        for root in r.iter_mut() {
            *root = uk - p / (uk * 3.0) + shift;
            uk *= omega;
        }
        r
    };
    for z in roots.iter_mut() {
        for _ in 0..3 {
            let f = ((*z + a) * *z + b) * *z + c;
            let df = (*z * 3.0 + a * 2.0) * *z + b;
            if df.norm() == 0.0 {
                break;
            }
            let step = f / df;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *z -= step;
        }
    }
    roots
}

/// Roots of `z³ − 2z² + (1 − m/w)z − 1/w`, i.e. the solutions of `K_m(z) = w`.
fn k_preimages(w: Complex64, m: f64) -> [Complex64; 3] {
    let one = Complex64::new(1.0, 0.0);
    cubic_roots(Complex64::new(-2.0, 0.0), one - m / w, -one / w)
}

fn nearest(roots: &[Complex64; 3], target: Complex64) -> (Complex64, f64, f64) {
    let mut d: Vec<(f64, Complex64)> = roots.iter().map(|r| ((r - target).norm(), *r)).collect();
    d.sort_by(|x, y| x.0.total_cmp(&y.0));
    (d[0].1, d[0].0, d[1].0)
}

/// `G_m(w) = ∫ (w − t)^{−1} μ_λ(dt)`, the Cauchy transform of `|λ − c|²`.
pub fn cauchy_transform(w: Complex64, lambda: f64) -> Result<Complex64> {
    let spec = CircularSpectrum::new(lambda)?;
    cauchy_transform_in(&spec, w)
}

pub(crate) fn cauchy_transform_in(spec: &CircularSpectrum, w: Complex64) -> Result<Complex64> {
    if w.norm() == 0.0 {
        return Err(Error::Pole("w = 0".into()));
    }
    if !w.re.is_finite() || !w.im.is_finite() {
        return arg("w must be finite");
    }
    if w.im == 0.0 && w.re >= spec.s_minus && w.re <= spec.s_plus {
        return Err(Error::BranchUndefined(format!("w = {} lies on the support [{}, {}]", w.re, spec.s_minus, spec.s_plus)));
    }
    if w.im < 0.0 {
        return Ok(cauchy_transform_in(spec, w.conj())?.conj());
    }
    let m = spec.m;
    let z = if w.norm() > 10.0 * spec.s_plus.max(1.0) {
        nearest(&k_preimages(w, m), w.inv()).0
    } else {
        track_root(spec, w)?
    };
    Ok(if w.im == 0.0 { Complex64::new(z.re, 0.0) } else { z })
}

/// Follows the branch with `z ≈ 1/w` down the vertical ray from
/// `Re w + iR` to `w`, taking geometric steps in the distance to `w`.
fn track_root(spec: &CircularSpectrum, w: Complex64) -> Result<Complex64> {
    let m = spec.m;
    let top = 10.0 * spec.s_plus.max(w.norm()).max(1.0);
    let at = |d: f64| Complex64::new(w.re, w.im + d);
    let mut d = top;
    let mut z = nearest(&k_preimages(at(d), m), at(d).inv()).0;
    let floor = 1e-15 * top;
    while d > 0.0 {
        let mut next = if d * 0.5 < floor { 0.0 } else { d * 0.5 };
        let mut tries = 0;
        loop {
            let (cand, d1, d2) = nearest(&k_preimages(at(next), m), z);
            if d1 <= 0.25 * d2 || tries >= 40 {
                if tries >= 40 && d1 > 0.25 * d2 {
                    log::debug!("root tracking ambiguous at w = {}", at(next));
                }
                z = cand;
                break;
            }
            // ambiguous: the step was too large relative to root separation
            next = if next == 0.0 { d * 0.5 } else { 0.5 * (d + next) };
            tries += 1;
        }
        d = next;
    }
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Numerical(format!("root tracking failed at w = {w}")));
    }
    Ok(z)
}

/// Stieltjes inversion parameters. At a point at distance `d` from the
/// nearer edge, `−Im G(t + iε d)/π` is sampled for each `ε` (with `d`
/// capped at 1) and extrapolated to zero by the polynomial through all
/// samples. Scaling by `d` keeps the samples in the regime where the error
/// is a smooth function of `ε`, even where the support starts at `~(λ − 1)³`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsSchedule {
    pub eps: Vec<f64>,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        EpsSchedule { eps: vec![1e-3, 1e-4, 1e-5] }
    }
}

/// Quadrature nodes and weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub rule: QuadratureRule,
}

/// `t_j = c + (h/2) cos θ_j`, `θ_j = (j + ½)π/n`, ascending, with weights
/// `(π/n)(h/2) sin θ_j`. Endpoints are never sampled.
pub fn chebyshev_grid(a: f64, b: f64, n: usize) -> Grid {
    let c = 0.5 * (a + b);
    let h2 = 0.5 * (b - a);
    let mut points = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for j in (0..n).rev() {
        let theta = (j as f64 + 0.5) * PI / n as f64;
        points.push(c + h2 * theta.cos());
        weights.push(PI / n as f64 * h2 * theta.sin());
    }
    Grid { points, weights, rule: QuadratureRule::ChebyshevMidpoint }
}

/// `−(1/π) Im G_m(t + iε)`.
pub fn smoothed_density(spec: &CircularSpectrum, t: f64, eps: f64) -> Result<f64> {
    Ok(-cauchy_transform_in(spec, Complex64::new(t, eps))?.im / PI)
}

/// The `ε → 0` limit taken exactly: for real `t` inside the support the
/// cubic has one conjugate pair of roots, and `G(t + i0)` is the member
/// with negative imaginary part.
pub fn boundary_density(spec: &CircularSpectrum, t: f64) -> f64 {
    if t <= spec.s_minus || t >= spec.s_plus {
        return 0.0;
    }
    let roots = k_preimages(Complex64::new(t, 0.0), spec.m);
    let lowest = roots.iter().map(|r| r.im).fold(f64::INFINITY, f64::min);
    (-lowest / PI).max(0.0)
}

/// Stieltjes-inversion density on `grid`; zero off `[s⁻, s⁺]`.
pub fn density(lambda: f64, grid: &Grid, schedule: &EpsSchedule) -> Result<SpectralMeasure> {
    let spec = CircularSpectrum::new(lambda)?;
    if schedule.eps.len() < 2 || schedule.eps.iter().any(|e| !(*e > 0.0)) {
        return arg("ε-schedule needs at least two positive values");
    }
    if schedule.eps.windows(2).any(|w| w[0] == w[1]) {
        return arg("ε-schedule values must be distinct");
    }
    let mut rho = Vec::with_capacity(grid.points.len());
    let mut clipped = 0;
    for &t in &grid.points {
        if t <= spec.s_minus || t >= spec.s_plus {
            rho.push(0.0);
            continue;
        }
        let d = (t - spec.s_minus).min(spec.s_plus - t).min(1.0);
        let eps: Vec<f64> = schedule.eps.iter().map(|e| e * d).collect();
        let mut r0 = 0.0;
        for (i, &ei) in eps.iter().enumerate() {
            let weight: f64 = eps.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &ej)| ej / (ej - ei)).product();
            r0 += weight * smoothed_density(&spec, t, ei)?;
        }
        if r0 < 0.0 {
            if r0 < -1e-8 {
                log::warn!("density extrapolation undershoots to {r0:e} at t = {t}; clipped to 0");
            }
            clipped += 1;
            rho.push(0.0);
        } else {
            rho.push(r0);
        }
    }
    Ok(SpectralMeasure::new(vec![], grid.points.clone(), rho, grid.weights.clone(), grid.rule)?.with_clipped(clipped))
}

/// `μ_λ`, the law of `|λ − c|²`, on an `n`-node Chebyshev grid over the support.
pub fn density_measure(lambda: f64, n: usize) -> Result<SpectralMeasure> {
    let (a, b) = support_endpoints(lambda)?;
    density(lambda, &chebyshev_grid(a, b, n), &EpsSchedule::default())
}

/// `μ_λ` with each density sample taken as the exact `ε → 0` limit.
pub fn boundary_density_measure(lambda: f64, n: usize) -> Result<SpectralMeasure> {
    let spec = CircularSpectrum::new(lambda)?;
    let grid = chebyshev_grid(spec.s_minus, spec.s_plus, n);
    let rho = grid.points.iter().map(|&t| boundary_density(&spec, t)).collect();
    SpectralMeasure::new(vec![], grid.points, rho, grid.weights, grid.rule)
}

pub use crate::measure::pushforward_inverse_sqrt;

/// Both derivations of `R_{|λ−c|²}(z) = Σ_n (1 + nλ²) z^{n−1}`.
#[derive(Clone, Debug)]
pub struct RTransformReport {
    /// Cumulants of `|λ − c|²` obtained analytically, in `lam2`.
    pub analytic: Vec<Poly>,
    /// The same from expanding product cumulants string by string.
    pub combinatorial: Vec<Poly>,
    /// `1 + nλ²`.
    pub expected: Vec<Poly>,
}

impl RTransformReport {
    pub fn analytic_matches(&self) -> bool {
        self.analytic == self.expected
    }

    pub fn combinatorial_matches(&self) -> bool {
        self.combinatorial == self.expected
    }

    /// The coefficients with `λ = 0`, which should be the free Poisson's.
    pub fn at_lambda_zero(&self) -> Vec<Poly> {
        self.analytic.iter().map(|p| p.substitute(LAMBDA2, &Poly::zero())).collect()
    }
}

/// Cumulants of `|λ − c|²` through the symmetrization: `μ_λ` (the even law
/// of `|λ − c|`) has R-transform `z + (√(1 + 4λ²z²) − 1)/(2z)`, its even
/// moments are the moments of `|λ − c|²`, and those moments give back the
/// cumulants. Everything is exact in `λ²`.
pub fn analytic_shift_cumulants(order: usize) -> Vec<Poly> {
    let lam2 = Poly::var(LAMBDA2);
    let shift = bernoulli_shift(&lam2, 2 * order - 1);
    // κ_j(μ_λ) is the coefficient of z^{j−1} in R_{μ_λ}
    let mut kappa = Vec::with_capacity(2 * order);
    for j in 1..=2 * order {
        let mut c = -shift.coeff(j - 1).cloned().unwrap_or_else(Poly::zero);
        if j == 2 {
            c += Poly::one();
        }
        kappa.push(c);
    }
    let moments = moments_from_cumulant_sequence(&kappa);
    let nu_moments: Vec<Poly> = (1..=order).map(|n| moments[2 * n - 1].clone()).collect();
    cumulants_from_moments(&nu_moments)
}

pub fn verify_circular_r_transform(order: usize) -> Result<RTransformReport> {
    let lam2 = Poly::var(LAMBDA2);
    let expected = (1..=order as i64).map(|n| &Poly::one() + &lam2.scale(&int(n))).collect();
    Ok(RTransformReport {
        analytic: analytic_shift_cumulants(order),
        combinatorial: circular_shift_cumulants(order)?,
        expected,
    })
}
