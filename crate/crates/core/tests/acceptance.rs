//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! (written straight to stdout so it shows without `--nocapture`) and then
//! asserts. Tolerances are pinned here.

use std::io::Write;

use num_bigint::BigUint;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;

use rdiag::circular::{self, cauchy_transform, inf_spec, support_endpoints, support_endpoints_numeric};
use rdiag::cumulants::{circular_shift_cumulants, Builtin, OperatorModel};
use rdiag::nc::fuss_catalan;
use rdiag::psd::{self, alpha_symbol, moment_polynomial, profile_count, quadrangulations, Alphas};
use rdiag::resolvent::{h_lambda, lower_bound_from_moments, resolvent_norm};
use rdiag::ring::{int, rat, rational_to_f64, Poly, RationalFunction, LAMBDA2};
use rdiag::series::{negative_moment_symbolic, negative_moments_at};
use rdiag::verify::subordination_grid;

const ENDPOINT_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-9;
const RATIO_TOL_NEAR: f64 = 0.01;
const RATIO_TOL_FAR: f64 = 0.10;
const MOMENT_ASYMPTOTIC_TOL: f64 = 0.05;
const QUADRATURE_TOL: f64 = 1e-5;
const QUADRATURE_POINTS: usize = 512;
const SUBORDINATION_TOL: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-10;
const SUP_ROOT_TOL: f64 = 0.02;

fn report(name: &str, ok: bool, detail: impl AsRef<str>) {
    let line = format!("{} {name}: {}\n", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "{name}: {}", detail.as_ref());
}

fn circ() -> OperatorModel {
    OperatorModel::builtin(Builtin::Circular)
}

fn fuss_f64(k: u64) -> f64 {
    rational_to_f64(&BigRational::from_integer(fuss_catalan(2, k).into()))
}

#[test]
fn circular_r_transform_identity() {
    let want: Vec<Poly> = (1..=8).map(|n| &Poly::one() + &Poly::var(LAMBDA2).scale(&int(n))).collect();
    let comb = circular_shift_cumulants(8).unwrap();
    let report_ = circular::verify_circular_r_transform(8).unwrap();
    let ok = comb == want && report_.analytic == want && report_.combinatorial_matches();
    report("circular_r_transform_identity", ok, "both routes give 1 + nλ², n = 1..8, exactly");
}

#[test]
fn support_endpoints_and_norm() {
    let mut worst_end: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    for l in [1.01, 1.1, 1.5, 2.0, 3.0] {
        let (a, b) = support_endpoints(l).unwrap();
        let (na, nb) = support_endpoints_numeric(l).unwrap();
        worst_end = worst_end.max((a - na).abs() / a.max(1.0)).max((b - nb).abs() / b.max(1.0));
        let want = inf_spec(l).unwrap().powf(-0.5);
        worst_norm = worst_norm.max((resolvent_norm(&circ(), l).unwrap().norm - want).abs() / want);
    }
    let ok = worst_end <= ENDPOINT_TOL && worst_norm <= NORM_TOL;
    report(
        "support_endpoints_and_norm",
        ok,
        format!("endpoint gap {worst_end:.3e} (tol {ENDPOINT_TOL:e}), norm gap {worst_norm:.3e} (tol {NORM_TOL:e})"),
    );
}

#[test]
fn main_theorem_ratio() {
    let ratios: Vec<f64> = [1.1, 1.01, 1.001].iter().map(|&l| resolvent_norm(&circ(), l).unwrap().ratio).collect();
    let gaps: Vec<f64> = ratios.iter().map(|r| (r - 1.0).abs()).collect();
    let ok = gaps[2] <= RATIO_TOL_NEAR && gaps[1] <= RATIO_TOL_FAR && gaps[0] > gaps[1] && gaps[1] > gaps[2];
    report("main_theorem_ratio", ok, format!("norm/asymptotic at λ = 1.1, 1.01, 1.001: {ratios:?}"));
}

#[test]
fn negative_moment_closed_forms() {
    let lam2 = Poly::var(LAMBDA2);
    let v = &Poly::var(&alpha_symbol(2)) + &Poly::one();
    let m = &lam2 - &Poly::one();
    let m2 = RationalFunction::new(Poly::one(), m.clone());
    let m4 = RationalFunction::new(&(&lam2.pow(2) - &Poly::one()) + &v, m.pow(4));
    let lagrange: Vec<RationalFunction> = (0..=1).map(|k| negative_moment_symbolic(k).unwrap().substitute("v", &v)).collect();
    let psd: Vec<RationalFunction> =
        (0..=1).map(|k| moment_polynomial(k, &Alphas::Symbolic).unwrap().to_rational_function()).collect();
    let ok = lagrange[0] == m2 && lagrange[1] == m4 && psd[0] == m2 && psd[1] == m4;
    report("negative_moment_closed_forms", ok, format!("m₋₂ = {m2}, m₋₄ = {m4} from Lagrange and PSD"));
}

#[test]
fn negative_moment_asymptotics() {
    let lambda = rat(101, 100);
    let m = rational_to_f64(&(&lambda * &lambda - int(1)));
    let mut worst: f64 = 0.0;
    let mut rows = vec![];
    for b in [Builtin::Circular, Builtin::TwoAtom] {
        let model = OperatorModel::builtin(b);
        let v = model.v_f64().unwrap();
        let ms = negative_moments_at(&model, 3, &lambda).unwrap();
        for (k, mk) in ms.iter().enumerate() {
            let scaled = rational_to_f64(mk) * m.powi(3 * k as i32 + 1) / v.powi(k as i32);
            let ratio = scaled / fuss_f64(k as u64);
            worst = worst.max((ratio - 1.0).abs());
            rows.push(format!("{}/k={k}: {ratio:.4}", model.name()));
        }
    }
    report(
        "negative_moment_asymptotics",
        worst <= MOMENT_ASYMPTOTIC_TOL,
        format!("scaled m₋₂ₖ₋₂ over C2_k at λ = 1.01 [{}], worst gap {worst:.4} (tol {MOMENT_ASYMPTOTIC_TOL})", rows.join(", ")),
    );
}

#[test]
fn triple_route_agreement() {
    let mut exact_ok = true;
    let mut worst: f64 = 0.0;
    for (lambda, l) in [(rat(3, 2), 1.5), (int(2), 2.0)] {
        let lagrange = negative_moments_at(&circ(), 3, &lambda).unwrap();
        let meas = circular::density_measure(l, QUADRATURE_POINTS).unwrap();
        for (k, e) in lagrange.iter().enumerate() {
            exact_ok &= &psd::negative_moment_psd(&circ(), &lambda, k).unwrap() == e;
            let e = rational_to_f64(e);
            worst = worst.max((meas.moment(-(k as i32 + 1)) - e).abs() / e);
        }
    }
    report(
        "triple_route_agreement",
        exact_ok && worst <= QUADRATURE_TOL,
        format!("Lagrange = PSD exactly: {exact_ok}; quadrature relative gap {worst:.3e} (tol {QUADRATURE_TOL:e})"),
    );
}

#[test]
fn psd_combinatorics() {
    let mut ok = true;
    for k in 0..=3usize {
        let c = fuss_catalan(2, k as u64);
        for t in 0..=k + 2 {
            let mut s = vec![3 * k + 1, t];
            s.resize(s.len().max(k + 1), 0);
            let binom: BigUint = (0..t).fold(BigUint::from(1u32), |acc, i| acc * BigUint::from(k.saturating_sub(i)) / BigUint::from(i + 1));
            let want = if t <= k { binom * &c } else { BigUint::zero() };
            ok &= profile_count(k, &s).unwrap() == want;
        }
    }
    let mut counts = vec![];
    for k in 0..=4 {
        let tilings = quadrangulations(k).unwrap();
        ok &= tilings.iter().all(|t| t.len() == 3 * k + 1);
        counts.push(tilings.len());
    }
    ok &= counts == [1, 1, 3, 12, 55];
    report("psd_combinatorics", ok, format!("Π counts for k ≤ 3 and t ≤ k + 2; tilings {counts:?}"));
}

#[test]
fn compression_bijection() {
    let r = psd::verify_bijection(2, 8).unwrap();
    let pairs: u64 = r.per_k.iter().map(|s| s.pairs).sum();
    report("compression_bijection", r.ok(), format!("{pairs} (pattern, partition) pairs, word length ≤ 8, k ≤ 2: {:?}", r.per_k));
}

#[test]
fn subordination_consistency() {
    let grid = subordination_grid();
    let mut gap: f64 = 0.0;
    let mut residual: f64 = 0.0;
    for &(l, t) in &grid {
        let h = h_lambda(&circ(), l, t).unwrap();
        let g = cauchy_transform(Complex64::new(-t * t, 0.0), l).unwrap();
        gap = gap.max((h.value + t * g.re).abs());
        residual = residual.max(h.residual);
    }
    report(
        "subordination_consistency",
        grid.len() == 20 && gap <= SUBORDINATION_TOL && residual < RESIDUAL_TOL,
        format!("{} points, gap {gap:.3e} (tol {SUBORDINATION_TOL:e}), residual {residual:.3e} (tol {RESIDUAL_TOL:e})", grid.len()),
    );
}

#[test]
fn lower_bound_route() {
    let moments: Vec<f64> = negative_moments_at(&circ(), 20, &rat(21, 20)).unwrap().iter().map(rational_to_f64).collect();
    let norm = resolvent_norm(&circ(), 1.05).unwrap().norm;
    let below = (1..=20).all(|k| lower_bound_from_moments(&moments, k).unwrap() <= norm);
    let sup = 1.5 * 3f64.sqrt();
    let root = fuss_f64(50).powf(1.0 / 100.0);
    let gap = (root - sup).abs() / sup;
    report(
        "lower_bound_route",
        below && gap <= SUP_ROOT_TOL,
        format!("bounds ≤ norm {norm:.6} for k ≤ 20: {below}; (C2_50)^(1/100) = {root:.4} vs {sup:.4}, gap {gap:.4} (tol {SUP_ROOT_TOL})"),
    );
}
