//! Norms of `(λ − a)^{−1}` for R-diagonal `a` with `‖a‖₂ = 1`.
//!
//! With `μ` the symmetrized law of `|a|` and `m = λ² − 1`, put
//! `B_λ(u) = R_μ(u) + (1 − √(1 + 4λ²u²))/(2u)`. On `(0, √(m/v))` it has a
//! single critical point `u*`, and the smallest singular value of `λ − a` is
//! `−B_λ(u*)`. In the rescaled variable `x = u/√m` this is the critical
//! point `x_λ` of `F_λ(x) = −m^{−3/2} B_λ(√m x)`.

use std::io::Write;

use serde::Serialize;

use crate::circular;
use crate::cumulants::{Builtin, OperatorModel};
use crate::error::{arg, Error, Result};
use crate::measure::{fmt17, SpectralMeasure};
use crate::ring::rational_to_f64;

/// Default guard on `λ − 1` for models whose `R_μ` is a truncated series.
pub const DEFAULT_TRUNCATION_GUARD: f64 = 1e-4;

/// How `R_μ` entered the computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Route {
    /// `R_μ(z) = z` exactly.
    ClosedForm,
    /// `R_μ` cut after `κ_{2·order}(μ)`. No error radius is available.
    Truncated { order: usize },
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Route::ClosedForm => write!(f, "closed-form"),
            Route::Truncated { order } => write!(f, "truncated-{order}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormResult {
    pub lambda: f64,
    /// `‖(λ − a)^{−1}‖`.
    pub norm: f64,
    /// `1/norm`, the smallest singular value of `λ − a`.
    pub m_lambda: f64,
    /// `√(27/32)·√v·(λ − 1)^{−3/2}`.
    pub asymptotic: f64,
    pub ratio: f64,
    pub x_lambda: f64,
    pub route: Route,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormOptions {
    /// Smallest `λ − 1` accepted when `R_μ` is truncated.
    pub truncation_guard: f64,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions { truncation_guard: DEFAULT_TRUNCATION_GUARD }
    }
}

/// `h(s) = s ∫ (t + s²)^{−1} meas(dt)`.
pub fn h_function(meas: &SpectralMeasure, s: f64) -> f64 {
    s * meas.integrate(|t| 1.0 / (t + s * s))
}

/// Solution of the subordination equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HLambda {
    /// `h_λ(t)`.
    pub value: f64,
    /// `s(λ, t)`.
    pub s: f64,
    /// `|(s − t)(1/h(s) − s + t) − λ²|` at the returned `s`.
    pub residual: f64,
}

/// `h_λ(t) = h(s)` where `s ∈ (t, ∞)` solves `(s − t)(1/h(s) − s + t) = λ²`.
pub fn h_lambda(model: &OperatorModel, lambda: f64, t: f64) -> Result<HLambda> {
    let meas = model
        .aa_star_measure()
        .ok_or_else(|| Error::Argument(format!("model {} has no aa* measure", model.name())))?;
    h_lambda_with(|s| h_function(meas, s), lambda, t)
}

/// As [`h_lambda`] with `h` supplied directly.
pub fn h_lambda_with(h: impl Fn(f64) -> f64, lambda: f64, t: f64) -> Result<HLambda> {
    if !(lambda > 0.0) || !(t > 0.0) || !lambda.is_finite() || !t.is_finite() {
        return arg(format!("h_λ(t) needs λ, t > 0, got λ = {lambda}, t = {t}"));
    }
    let l2 = lambda * lambda;
    let g = |s: f64| (s - t) * (1.0 / h(s) - s + t) - l2;
    let mut lo = t;
    let mut step = t.max(1.0);
    let mut hi = t + step;
    let mut expansions = 0;
    // g(t⁺) = −λ², and g grows like t·s for large s
    while !(g(hi) > 0.0) {
        if !g(hi).is_finite() {
            return Err(Error::Numerical(format!("subordination equation not finite at s = {hi}")));
        }
        lo = hi;
        step *= 2.0;
        hi = t + step;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Numerical(format!(
                "no bracket for the subordination equation: λ = {lambda}, t = {t}, last g({hi}) = {}",
                g(hi)
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s = if g(lo).abs() < g(hi).abs() { lo } else { hi };
    Ok(HLambda { value: h(s), s, residual: g(s).abs() })
}

/// `Σ_{n≤N} κ_{2n}(μ) u^{2n−1}` and its derivative, minus the leading `u`
/// and `1` (which `b_parts` folds in analytically).
fn r_tail(kappas: &[f64], u: f64) -> (f64, f64) {
    let u2 = u * u;
    let mut val = 0.0;
    let mut der = 0.0;
    let mut even = 1.0; // u^{2n−2}, starting at n = 1
    for (i, &k) in kappas.iter().enumerate() {
        let n = i + 1;
        if n >= 2 {
            val += k * even * u;
            der += (2 * n - 1) as f64 * k * even;
        }
        even *= u2;
    }
    (val, der)
}

/// `(B_λ(u), B_λ′(u))`, written without the cancellation of `R_μ(u) ≈ u`
/// against `λ²u` as `m → 0`.
fn b_parts(kappas: &[f64], lambda: f64, u: f64) -> (f64, f64) {
    let l2 = lambda * lambda;
    let m = l2 - 1.0;
    let q = 4.0 * l2 * u * u;
    let s = (1.0 + q).sqrt();
    let s_minus_1 = q / (s + 1.0);
    let (tail, tail_der) = r_tail(kappas, u);
    // u − 2λ²u/(1+S) = u(S − 1 − 2m)/(1 + S)
    let b = u * (s_minus_1 - 2.0 * m) / (1.0 + s) + tail;
    // 1 − 2λ²/(S(1+S)) = ((S − 1) + q − 2m)/(S(1+S))
    let db = (s_minus_1 + q - 2.0 * m) / (s * (1.0 + s)) + tail_der;
    (b, db)
}

fn model_kappas(model: &OperatorModel) -> (Vec<f64>, Route) {
    if model.has_closed_form_r() {
        (vec![1.0], Route::ClosedForm)
    } else {
        let k: Vec<f64> = model.mu_even_cumulants().iter().map(rational_to_f64).collect();
        let order = k.len();
        (k, Route::Truncated { order })
    }
}

fn check_regime(model: &OperatorModel, lambda: f64, opts: &NormOptions) -> Result<(f64, Route, Vec<f64>)> {
    if !(lambda > 1.0) || !lambda.is_finite() {
        return arg(format!("λ = {lambda} must exceed 1"));
    }
    let v = variance_v(model)?;
    if !(v > 0.0) {
        return arg(format!(
            "model {} has v = {v}; the resolvent asymptotics need v > 0, which fails exactly for Haar unitaries",
            model.name()
        ));
    }
    let (kappas, route) = model_kappas(model);
    if let Route::Truncated { order } = route {
        if lambda - 1.0 < opts.truncation_guard {
            return Err(Error::Regime(format!(
                "λ − 1 = {:e} is below the guard {:e} for R_μ truncated at order {order}",
                lambda - 1.0,
                opts.truncation_guard
            )));
        }
    }
    Ok((v, route, kappas))
}

/// `F_λ′(x)` for the model's `R_μ`.
pub fn f_lambda_derivative(model: &OperatorModel, lambda: f64, x: f64) -> f64 {
    let (kappas, _) = model_kappas(model);
    let m = lambda * lambda - 1.0;
    -b_parts(&kappas, lambda, m.sqrt() * x).1 / m
}

/// `F_λ(x) = −m^{−3/2} B_λ(√m x)`.
pub fn f_lambda(model: &OperatorModel, lambda: f64, x: f64) -> f64 {
    let (kappas, _) = model_kappas(model);
    let m = lambda * lambda - 1.0;
    -b_parts(&kappas, lambda, m.sqrt() * x).0 / m.powf(1.5)
}

/// The root `x_λ ∈ (0, 1/√v)` of `F_λ′`, by bisection.
pub fn find_x_lambda(model: &OperatorModel, lambda: f64) -> Result<f64> {
    find_x_lambda_with(model, lambda, &NormOptions::default())
}

pub fn find_x_lambda_with(model: &OperatorModel, lambda: f64, opts: &NormOptions) -> Result<f64> {
    let (v, _, kappas) = check_regime(model, lambda, opts)?;
    Ok(x_lambda_inner(&kappas, lambda, v)?.0)
}

fn x_lambda_inner(kappas: &[f64], lambda: f64, v: f64) -> Result<(f64, f64)> {
    let m = lambda * lambda - 1.0;
    let sm = m.sqrt();
    let fprime = |x: f64| -b_parts(kappas, lambda, sm * x).1 / m;
    let end = 1.0 / v.sqrt();
    // A truncated R_μ can turn F_λ′ positive again far out, so take the
    // first sign change rather than bracketing the whole interval.
    const SCAN: usize = 512;
    let mut lo = 0.0;
    let mut hi = f64::NAN;
    for i in 1..=SCAN {
        let x = end * i as f64 / SCAN as f64;
        let f = fprime(x);
        if !f.is_finite() {
            return Err(Error::Numerical(format!("F_λ′({x}) is not finite at λ = {lambda}")));
        }
        if f <= 0.0 {
            hi = x;
            break;
        }
        lo = x;
    }
    if hi.is_nan() {
        return Err(Error::Regime(format!(
            "F_λ′ stays positive on [0, 1/√v] at λ = {lambda}; F′(1/√v) = {:e}",
            fprime(end)
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fprime(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let b = b_parts(kappas, lambda, sm * x).0;
    Ok((x, b))
}

/// `‖(λ − a)^{−1}‖ = 1/((λ² − 1)^{3/2} F_λ(x_λ))`.
pub fn resolvent_norm(model: &OperatorModel, lambda: f64) -> Result<NormResult> {
    resolvent_norm_with(model, lambda, &NormOptions::default())
}

pub fn resolvent_norm_with(model: &OperatorModel, lambda: f64, opts: &NormOptions) -> Result<NormResult> {
    let (v, route, kappas) = check_regime(model, lambda, opts)?;
    let (x, b) = x_lambda_inner(&kappas, lambda, v)?;
    if !(b < 0.0) {
        return Err(Error::Numerical(format!("B_λ(u*) = {b:e} is not negative at λ = {lambda}")));
    }
    let m_lambda = -b;
    let norm = 1.0 / m_lambda;
    let asymptotic = asymptotic_norm(v, lambda)?;
    Ok(NormResult { lambda, norm, m_lambda, asymptotic, ratio: norm / asymptotic, x_lambda: x, route })
}

/// `√(27/32)·√v·(λ − 1)^{−3/2}`.
pub fn asymptotic_norm(v: f64, lambda: f64) -> Result<f64> {
    if !(v > 0.0) {
        return arg(format!("v = {v} must be positive"));
    }
    if !(lambda > 1.0) {
        return arg(format!("λ = {lambda} must exceed 1"));
    }
    Ok((27.0f64 / 32.0).sqrt() * v.sqrt() * (lambda - 1.0).powf(-1.5))
}

/// `(m_{−2k−2}/m_{−2})^{1/(2k)}` from `moments = [m₋₂, m₋₄, …]`; never
/// exceeds the norm.
pub fn lower_bound_from_moments(moments: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return arg("k must be at least 1");
    }
    if moments.len() < k + 1 {
        return arg(format!("need m₋₂ … m₋{}, got {} values", 2 * k + 2, moments.len()));
    }
    let (first, last) = (moments[0], moments[k]);
    if !(first > 0.0) || !(last > 0.0) {
        return arg("negative moments must be positive");
    }
    Ok((last / first).powf(1.0 / (2 * k) as f64))
}

/// `v(a) = ‖a‖₄⁴ − 1`, from `α₂` or else from the `aa*` measure.
pub fn variance_v(model: &OperatorModel) -> Result<f64> {
    if let Ok(v) = model.v_f64() {
        return Ok(v);
    }
    match model.aa_star_measure() {
        Some(meas) => Ok(meas.moment(2) - 1.0),
        None => arg(format!("model {} has neither α₂ nor an aa* measure", model.name())),
    }
}

/// `M_λ = ‖λ − c‖ = √(s⁺)` for the circular operator.
pub fn circular_upper_norm(lambda: f64) -> Result<f64> {
    Ok(circular::support_endpoints(lambda)?.1.sqrt())
}

/// `λ` values from `start` to `end` with `λ − 1` geometrically spaced.
pub fn sweep_lambdas(start: f64, end: f64, steps: usize) -> Result<Vec<f64>> {
    if !(start > 1.0 && end > start) {
        return arg(format!("need 1 < start < end, got {start} and {end}"));
    }
    if steps < 2 {
        return arg("a sweep needs at least two steps");
    }
    let (a, b) = ((start - 1.0).ln(), (end - 1.0).ln());
    let mut out: Vec<f64> = (0..steps).map(|i| 1.0 + (a + (b - a) * i as f64 / (steps - 1) as f64).exp()).collect();
    out[0] = start;
    out[steps - 1] = end;
    Ok(out)
}

/// Norms along a sweep, computed in parallel and returned in `λ` order.
pub fn norm_sweep(model: &OperatorModel, lambdas: &[f64], opts: &NormOptions) -> Result<Vec<NormResult>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = lambdas.iter().map(|&l| s.spawn(move || resolvent_norm_with(model, l, opts))).collect();
        handles.into_iter().map(|h| h.join().expect("norm worker panicked")).collect()
    })
}

pub fn write_sweep_csv<W: Write>(rows: &[NormResult], mut out: W) -> std::io::Result<()> {
    writeln!(out, "lambda,norm,asymptotic,ratio,route")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", fmt17(r.lambda), fmt17(r.norm), fmt17(r.asymptotic), fmt17(r.ratio), r.route)?;
    }
    Ok(())
}

/// The circular model, for callers that only need the closed form.
pub fn circular_model() -> OperatorModel {
    OperatorModel::builtin(Builtin::Circular)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circular::{cauchy_transform, inf_spec};
    use crate::nc::fuss_catalan;
    use crate::ring::rational_to_f64;
    use crate::series::negative_moments_at;
    use num_complex::Complex64;
    use num_rational::BigRational;

    fn semicircle_h(s: f64) -> f64 {
        ((s * s + 4.0).sqrt() - s) / 2.0
    }

    #[test]
    fn h_function_examples() {
        assert!((h_function(&SpectralMeasure::point_mass(1.0), 1.0) - 0.5).abs() < 1e-15);
        let fp = SpectralMeasure::free_poisson(512);
        let s: f64 = 1e3;
        let want = 1.0 / s - 1.0 / s.powi(3);
        assert!((h_function(&fp, s) - want).abs() < 1e-6 * want);
        for s in [0.5, 1.0, 2.0] {
            assert!((h_function(&fp, s) - semicircle_h(s)).abs() < 1e-10, "s = {s}");
        }
    }

    #[test]
    fn h_lambda_residual_and_cauchy_consistency() {
        let circ = circular_model();
        for &l in &[1.2, 2.0] {
            for &t in &[0.05, 0.3, 1.0, 3.0] {
                let hl = h_lambda(&circ, l, t).unwrap();
                assert!(hl.residual < 1e-10, "λ = {l}, t = {t}, residual {}", hl.residual);
                assert!(hl.s > t);
                let g = cauchy_transform(Complex64::new(-t * t, 0.0), l).unwrap();
                assert!((g.re + hl.value / t).abs() < 1e-6 * g.re.abs(), "λ = {l}, t = {t}");
            }
        }
    }

    #[test]
    fn corollary_negative_root() {
        let l = 1.5;
        for s in [5.0, 10.0, 40.0] {
            let h = semicircle_h(s);
            let d = 1.0 - 4.0 * l * l * h * h;
            assert!(d >= 0.0);
            let t = s - 1.0 / (2.0 * h) - d.sqrt() / (2.0 * h);
            assert!(t > 0.0);
            let hl = h_lambda_with(semicircle_h, l, t).unwrap();
            assert!((hl.value - h).abs() < 1e-8, "s = {s}");
        }
    }

    #[test]
    fn h_lambda_small_t_limit() {
        let hl = h_lambda(&circular_model(), 2.0, 1e-3).unwrap();
        assert!((hl.value / 1e-3 - 1.0 / 3.0).abs() < 1e-4);
        assert!(h_lambda(&circular_model(), 2.0, 0.0).is_err());
    }

    #[test]
    fn circular_norm_matches_inf_spec() {
        let circ = circular_model();
        for i in 0..20 {
            let l = 1.01 + (3.0 - 1.01) * i as f64 / 19.0;
            let r = resolvent_norm(&circ, l).unwrap();
            let want = inf_spec(l).unwrap().powf(-0.5);
            assert!((r.norm - want).abs() <= 1e-9 * want, "λ = {l}: {} vs {want}", r.norm);
            assert!((r.norm * r.m_lambda - 1.0).abs() < 1e-12);
            assert_eq!(r.route, Route::ClosedForm);
        }
    }

    #[test]
    fn critical_point_limits() {
        let circ = circular_model();
        let l = 1.0 + 1e-6;
        let x = find_x_lambda(&circ, l).unwrap();
        assert!((x - 1.0 / 3f64.sqrt()).abs() < 1e-3);
        assert!((f_lambda(&circ, l, x) - (4.0f64 / 27.0).sqrt()).abs() < 1e-3);
        assert!(f_lambda_derivative(&circ, l, x).abs() < 1e-12);
    }

    #[test]
    fn main_theorem_ratio() {
        let circ = circular_model();
        let ratios: Vec<f64> = [1.1, 1.01, 1.001].iter().map(|&l| resolvent_norm(&circ, l).unwrap().ratio).collect();
        assert!((ratios[2] - 1.0).abs() < 0.01);
        assert!((ratios[1] - 1.0).abs() < 0.1);
        assert!((ratios[0] - 1.0).abs() > (ratios[1] - 1.0).abs());
        assert!((ratios[1] - 1.0).abs() > (ratios[2] - 1.0).abs());
        let two = OperatorModel::builtin(Builtin::TwoAtom);
        let r = resolvent_norm(&two, 1.001).unwrap();
        assert!((r.ratio - 1.0).abs() < 0.01);
        assert_eq!(r.route, Route::Truncated { order: two.mu_even_cumulants().len() });
    }

    #[test]
    fn rejections() {
        let haar = OperatorModel::builtin(Builtin::Haar);
        assert!(matches!(resolvent_norm(&haar, 1.5), Err(Error::Argument(_))));
        let two = OperatorModel::builtin(Builtin::TwoAtom);
        assert!(matches!(resolvent_norm(&two, 1.0 + 1e-6), Err(Error::Regime(_))));
        assert!(resolvent_norm(&circular_model(), 1.0).is_err());
        let loose = NormOptions { truncation_guard: 1e-8 };
        assert!(resolvent_norm_with(&two, 1.0 + 1e-6, &loose).is_ok());
    }

    #[test]
    fn asymptotic_values() {
        let a = asymptotic_norm(1.0, 1.01).unwrap();
        assert!((a - (27.0f64 / 32.0).sqrt() * 1e3).abs() < 1e-9 * a);
        assert!((asymptotic_norm(4.0, 1.2).unwrap() - 2.0 * asymptotic_norm(1.0, 1.2).unwrap()).abs() < 1e-12);
        assert!(asymptotic_norm(0.0, 1.2).is_err());
    }

    #[test]
    fn variance_examples() {
        assert_eq!(variance_v(&circular_model()).unwrap(), 1.0);
        assert_eq!(variance_v(&OperatorModel::builtin(Builtin::Haar)).unwrap(), 0.0);
        assert_eq!(variance_v(&OperatorModel::builtin(Builtin::TwoAtom)).unwrap(), 1.0);
    }

    #[test]
    fn lower_bounds() {
        let circ = circular_model();
        let l = 1.05;
        let lam = BigRational::new(105.into(), 100.into());
        let moments: Vec<f64> = negative_moments_at(&circ, 12, &lam).unwrap().iter().map(rational_to_f64).collect();
        let norm = resolvent_norm(&circ, l).unwrap().norm;
        for k in 1..=12 {
            assert!(lower_bound_from_moments(&moments, k).unwrap() < norm);
        }
        // k = 1 from the closed forms: bound² = (λ⁴ − 1 + v)/(λ² − 1)³
        let l2 = l * l;
        let b1 = lower_bound_from_moments(&moments, 1).unwrap();
        assert!((b1 * b1 - l2 * l2 / (l2 - 1.0).powi(3)).abs() < 1e-9 * b1 * b1);
        assert!(lower_bound_from_moments(&[1.0, -1.0], 1).is_err());
        assert!(lower_bound_from_moments(&[1.0], 1).is_err());
        let c50 = rational_to_f64(&BigRational::from_integer(fuss_catalan(2, 50).into()));
        assert!(c50.powf(1.0 / 100.0) < 1.5 * 3f64.sqrt());
    }

    #[test]
    fn sweep_and_csv() {
        let ls = sweep_lambdas(1.001, 2.0, 30).unwrap();
        assert_eq!(ls.len(), 30);
        assert!(ls.windows(2).all(|w| w[0] < w[1]));
        let rows = norm_sweep(&circular_model(), &ls, &NormOptions::default()).unwrap();
        assert!((rows[0].ratio - 1.0).abs() < 0.01);
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lambda,norm,asymptotic,ratio,route\n"));
        assert_eq!(text.lines().count(), 31);
        assert!(sweep_lambdas(2.0, 1.5, 5).is_err());
        assert!((circular_upper_norm(2.0).unwrap().powi(2) - circular::support_endpoints(2.0).unwrap().1).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn norm_decreases_in_lambda(l in 1.01f64..3.0, d in 0.01f64..0.5, two in any::<bool>()) {
                // the truncated two-atom R_μ loses its critical point past λ ≈ 1.67
                let (model, l, d) = if two {
                    (OperatorModel::builtin(Builtin::TwoAtom), 1.0 + (l - 1.0) / 8.0, d / 2.0)
                } else {
                    (circular_model(), l, d)
                };
                let a = resolvent_norm(&model, l).unwrap();
                let b = resolvent_norm(&model, l + d).unwrap();
                prop_assert!(b.norm < a.norm);
                // the spectral radius bound ‖(λ − a)^{−1}‖ ≥ 1/(λ + ‖a‖₂) is far weaker, use the first moment bound
                let l2 = l * l;
                let v = variance_v(&model).unwrap();
                let b1 = ((l2 * l2 - 1.0 + v) / (l2 - 1.0).powi(3)).sqrt();
                prop_assert!(b1 <= a.norm * (1.0 + 1e-12));
            }

            #[test]
            fn x_lambda_is_critical(l in 1.01f64..3.0) {
                let circ = circular_model();
                let x = find_x_lambda(&circ, l).unwrap();
                prop_assert!(x > 0.0 && x < 1.0);
                prop_assert!(f_lambda_derivative(&circ, l, 0.5 * x) > 0.0);
                prop_assert!(f_lambda_derivative(&circ, l, 0.5 * (x + 1.0)) < 0.0);
            }
        }
    }
}
