//! Runnable invariant suites with a machine-readable report.
//!
//! Each check measures a residual and compares it to a pinned tolerance.
//! Exact checks use a residual of 0 (agreement) or 1 (disagreement).

use std::collections::BTreeMap;
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::circular::{self, cauchy_transform, inf_spec, support_endpoints, support_endpoints_numeric};
use crate::cumulants::{circular_shift_cumulants, Builtin, OperatorModel};
use crate::error::{Error, Result};
use crate::nc::{catalan, enumerate_nc, fuss_catalan};
use crate::psd::{self, alpha_symbol, count_quadrangulations, moment_polynomial, profile_count, quadrangulations, Alphas};
use crate::resolvent::{self, h_lambda, lower_bound_from_moments, resolvent_norm};
use crate::ring::{int, rat, rational_to_f64, Poly, RationalFunction, LAMBDA2};
use crate::series::{negative_moment_symbolic, negative_moments_at};
use num_complex::Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Combinatorial,
    Analytic,
    Asymptotic,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Suite::All),
            "combinatorial" => Ok(Suite::Combinatorial),
            "analytic" => Ok(Suite::Analytic),
            "asymptotic" => Ok(Suite::Asymptotic),
            other => Err(Error::Parse(format!("unknown suite '{other}'"))),
        }
    }
}

impl Suite {
    fn includes(self, s: Suite) -> bool {
        self == Suite::All || self == s
    }
}

/// Deliberate corruption, so that a harness can confirm checks can fail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Faults {
    /// Adds 1 to the third combinatorial R-transform coefficient.
    pub corrupt_r_coefficient: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub suite: Suite,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Builder {
    suite: Suite,
    checks: Vec<Check>,
}

impl Builder {
    /// Records `residual ≤ tolerance`. A library error becomes a failed check
    /// with an infinite residual.
    fn measure(&mut self, name: &str, suite: Suite, tolerance: f64, f: impl FnOnce() -> Result<(f64, String)>) {
        if !self.suite.includes(suite) {
            return;
        }
        let (residual, detail) = match f() {
            Ok(v) => v,
            Err(e) => (f64::INFINITY, format!("error: {e}")),
        };
        let passed = residual <= tolerance;
        log::info!("{name}: residual {residual:e} (tolerance {tolerance:e})");
        self.checks.push(Check { name: name.into(), suite, passed, residual, tolerance, detail });
    }

    fn exact(&mut self, name: &str, suite: Suite, f: impl FnOnce() -> Result<(bool, String)>) {
        self.measure(name, suite, 0.0, || f().map(|(ok, d)| (if ok { 0.0 } else { 1.0 }, d)));
    }
}

pub fn run(suite: Suite) -> Report {
    run_with_faults(suite, Faults::default())
}

pub fn run_with_faults(suite: Suite, faults: Faults) -> Report {
    let mut b = Builder { suite, checks: vec![] };
    combinatorial(&mut b, faults);
    analytic(&mut b);
    asymptotic(&mut b);
    let passed = b.checks.iter().all(|c| c.passed);
    Report { suite, passed, checks: b.checks }
}

/// `1 + nλ²` for `n = 1..=order`.
fn expected_r_coefficients(order: usize) -> Vec<Poly> {
    (1..=order as i64).map(|n| &Poly::one() + &Poly::var(LAMBDA2).scale(&int(n))).collect()
}

fn binomial(n: usize, r: usize) -> BigUint {
    (0..r).fold(BigUint::from(1u32), |acc, i| acc * BigUint::from(n - i) / BigUint::from(i + 1))
}

fn combinatorial(b: &mut Builder, faults: Faults) {
    const S: Suite = Suite::Combinatorial;

    b.exact("nc_catalan_counts", S, || {
        let bad: Vec<usize> = (0..=10).filter(|&n| enumerate_nc(n).map(|v| BigUint::from(v.len()) != catalan(n as u64)).unwrap_or(true)).collect();
        Ok((bad.is_empty(), format!("|NC(n)| = Catalan(n) for n ≤ 10; mismatches at {bad:?}")))
    });

    b.exact("circular_r_combinatorial", S, || {
        let mut got = circular_shift_cumulants(8)?;
        if faults.corrupt_r_coefficient {
            got[2] += Poly::one();
        }
        let want = expected_r_coefficients(8);
        let bad: Vec<usize> = (0..8).filter(|&i| got[i] != want[i]).map(|i| i + 1).collect();
        Ok((bad.is_empty(), format!("coefficients 1 + nλ², n = 1..8; mismatches at n = {bad:?}")))
    });

    b.exact("psd_profile_counts", S, || {
        let mut bad = vec![];
        for k in 0..=3usize {
            let c = fuss_catalan(2, k as u64);
            for t in 0..=k + 2 {
                let mut s = vec![3 * k + 1, t];
                s.resize(s.len().max(k + 1), 0);
                let want = if t <= k { binomial(k, t) * &c } else { BigUint::zero() };
                if profile_count(k, &s)? != want {
                    bad.push((k, t));
                }
            }
        }
        Ok((bad.is_empty(), format!("Π_(k+1)(3k+1, t) = C(k,t)·C2_k and 0 for t > k, k ≤ 3; mismatches {bad:?}")))
    });

    b.exact("quadrangulations", S, || {
        let mut counts = vec![];
        let mut segments_ok = true;
        for k in 0..=4 {
            let tilings = quadrangulations(k)?;
            segments_ok &= tilings.iter().all(|t| t.len() == 3 * k + 1);
            counts.push(count_quadrangulations(k)?);
        }
        let want: Vec<BigUint> = (0..=4).map(|k| fuss_catalan(2, k)).collect();
        Ok((counts == want && segments_ok, format!("counts {counts:?}, 3k+1 segments each: {segments_ok}")))
    });

    b.exact("compression_bijection", S, || {
        let r = psd::verify_bijection(2, 8)?;
        let pairs: u64 = r.per_k.iter().map(|s| s.pairs).sum();
        Ok((r.ok(), format!("{pairs} pairs round-tripped for k ≤ 2, word length ≤ 8: {:?}", r.per_k)))
    });

    b.exact("negative_moment_closed_forms", S, || {
        let lam2 = Poly::var(LAMBDA2);
        let v = &Poly::var(&alpha_symbol(2)) + &Poly::one();
        let m = &lam2 - &Poly::one();
        let m2 = RationalFunction::new(Poly::one(), m.clone());
        let m4 = RationalFunction::new(&(&lam2.pow(2) - &Poly::one()) + &v, m.pow(4));
        let sub_v = |r: RationalFunction| r.substitute("v", &v);
        let lagrange = [sub_v(negative_moment_symbolic(0)?), sub_v(negative_moment_symbolic(1)?)];
        let psd = [moment_polynomial(0, &Alphas::Symbolic)?.to_rational_function(), moment_polynomial(1, &Alphas::Symbolic)?.to_rational_function()];
        let ok = lagrange[0] == m2 && lagrange[1] == m4 && psd[0] == m2 && psd[1] == m4;
        Ok((ok, format!("m₋₂ = {m2}, m₋₄ = {m4} from Lagrange and PSD")))
    });

    b.exact("triple_route_moments", S, || {
        let circ = OperatorModel::builtin(Builtin::Circular);
        let mut disagreements = 0;
        for lambda in [rat(3, 2), int(2)] {
            let lagrange = negative_moments_at(&circ, 3, &lambda)?;
            for (k, l) in lagrange.iter().enumerate() {
                if &psd::negative_moment_psd(&circ, &lambda, k)? != l {
                    disagreements += 1;
                }
            }
        }
        Ok((disagreements == 0, format!("Lagrange vs PSD, circular, k ≤ 3, λ ∈ {{3/2, 2}}: discrepancy {disagreements}")))
    });
}

fn analytic(b: &mut Builder) {
    const S: Suite = Suite::Analytic;
    const LAMBDAS: [f64; 5] = [1.01, 1.1, 1.5, 2.0, 3.0];

    b.exact("circular_r_analytic", S, || {
        let r = circular::verify_circular_r_transform(8)?;
        Ok((r.analytic_matches(), "cumulants of |λ−c|² via the symmetrized law equal 1 + nλ², n = 1..8".into()))
    });

    b.measure("support_endpoints", S, 1e-12, || {
        let mut worst: f64 = 0.0;
        for l in LAMBDAS {
            let (a, b) = support_endpoints(l)?;
            let (na, nb) = support_endpoints_numeric(l)?;
            worst = worst.max((a - na).abs()).max((b - nb).abs() / b.max(1.0));
        }
        Ok((worst, format!("closed-form vs critical points of K_m at λ ∈ {LAMBDAS:?}")))
    });

    b.measure("norm_equals_inf_spec", S, 1e-9, || {
        let circ = OperatorModel::builtin(Builtin::Circular);
        let mut worst: f64 = 0.0;
        for l in LAMBDAS {
            let want = inf_spec(l)?.powf(-0.5);
            worst = worst.max((resolvent_norm(&circ, l)?.norm - want).abs() / want);
        }
        Ok((worst, "relative gap between the F_λ critical value and inf spec^(−1/2)".into()))
    });

    b.measure("density_mass", S, 1e-6, || {
        let meas = circular::density_measure(2.0, 512)?;
        let (lo, hi) = support_endpoints(2.0)?;
        let inside = meas.grid().iter().all(|&t| t > lo && t < hi);
        let mean_gap = (meas.moment(1) - 5.0).abs();
        let res = (meas.total_mass() - 1.0).abs().max(mean_gap);
        Ok((if inside { res } else { f64::INFINITY }, format!("λ = 2, 512 points: |mass − 1| and |mean − (λ²+1)|, grid inside support: {inside}")))
    });

    b.measure("quadrature_route_moments", S, 1e-5, || {
        let circ = OperatorModel::builtin(Builtin::Circular);
        let mut worst: f64 = 0.0;
        for (lambda, l) in [(rat(3, 2), 1.5), (int(2), 2.0)] {
            let exact = negative_moments_at(&circ, 3, &lambda)?;
            let meas = circular::density_measure(l, 512)?;
            for (k, e) in exact.iter().enumerate() {
                let e = rational_to_f64(e);
                worst = worst.max((meas.moment(-(k as i32 + 1)) - e).abs() / e);
            }
        }
        Ok((worst, "Stieltjes density quadrature vs exact, circular, k ≤ 3, λ ∈ {1.5, 2}".into()))
    });

    let grid = subordination_grid();
    b.measure("h_lambda_vs_cauchy", S, 1e-6, || {
        let circ = OperatorModel::builtin(Builtin::Circular);
        let mut worst: f64 = 0.0;
        for &(l, t) in &grid {
            let h = h_lambda(&circ, l, t)?;
            let g = cauchy_transform(Complex64::new(-t * t, 0.0), l)?;
            worst = worst.max((h.value + t * g.re).abs());
        }
        Ok((worst, format!("|h_λ(t) + t·G_ν(−t²)| over {} points", grid.len())))
    });

    b.measure("h_lambda_residuals", S, 1e-10, || {
        let circ = OperatorModel::builtin(Builtin::Circular);
        let mut worst: f64 = 0.0;
        for &(l, t) in &grid {
            worst = worst.max(h_lambda(&circ, l, t)?.residual);
        }
        Ok((worst, "max |(s − t)(1/h(s) − s + t) − λ²| at the solutions".into()))
    });
}

/// Twenty `(λ, t)` pairs spread over moderate and near-critical `λ`.
pub fn subordination_grid() -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(20);
    for l in [1.05, 1.5, 2.0, 3.0] {
        for t in [0.05, 0.2, 0.7, 1.5, 4.0] {
            out.push((l, t));
        }
    }
    out
}

fn asymptotic(b: &mut Builder) {
    const S: Suite = Suite::Asymptotic;

    b.measure("main_theorem_circular", S, 0.01, || {
        let circ = OperatorModel::builtin(Builtin::Circular);
        let r: Vec<f64> = [1.1, 1.01, 1.001].iter().map(|&l| resolvent_norm(&circ, l).map(|n| n.ratio)).collect::<Result<_>>()?;
        let gaps: Vec<f64> = r.iter().map(|x| (x - 1.0).abs()).collect();
        let monotone = gaps[0] > gaps[1] && gaps[1] > gaps[2];
        let res = if monotone && gaps[1] <= 0.1 { gaps[2] } else { f64::INFINITY };
        Ok((res, format!("norm/asymptotic at λ = 1.1, 1.01, 1.001: {r:?}")))
    });

    b.measure("main_theorem_two_atom", S, 0.01, || {
        let r = resolvent_norm(&OperatorModel::builtin(Builtin::TwoAtom), 1.001)?;
        Ok(((r.ratio - 1.0).abs(), format!("ratio {} at λ = 1.001 ({} R_μ)", r.ratio, r.route)))
    });

    b.measure("negative_moment_asymptotics", S, 0.05, || {
        let lambda = rat(1001, 1000);
        let m = rational_to_f64(&(&lambda * &lambda - int(1)));
        let mut worst: f64 = 0.0;
        for model in [Builtin::Circular, Builtin::TwoAtom].map(OperatorModel::builtin) {
            let v = resolvent::variance_v(&model)?;
            for (k, mk) in negative_moments_at(&model, 3, &lambda)?.iter().enumerate() {
                let c = rational_to_f64(&BigRational::from_integer(fuss_catalan(2, k as u64).into()));
                let scaled = rational_to_f64(mk) * m.powi(3 * k as i32 + 1) / v.powi(k as i32);
                worst = worst.max((scaled / c - 1.0).abs());
            }
        }
        Ok((worst, "m₋₂ₖ₋₂(λ²−1)^(3k+1)/v^k over C2_k at λ = 1.001, k ≤ 3, circular and two-atom".into()))
    });

    b.measure("moment_lower_bound", S, 0.0, || {
        let circ = OperatorModel::builtin(Builtin::Circular);
        let moments: Vec<f64> = negative_moments_at(&circ, 20, &rat(21, 20))?.iter().map(rational_to_f64).collect();
        let norm = resolvent_norm(&circ, 1.05)?.norm;
        let mut excess: f64 = 0.0;
        for k in 1..=20 {
            excess = excess.max(lower_bound_from_moments(&moments, k)? - norm);
        }
        Ok((excess.max(0.0), format!("max over k ≤ 20 of bound − norm at λ = 1.05 (norm {norm})")))
    });

    b.measure("fuss_catalan_root_growth", S, 0.0, || {
        let sup = 1.5 * 3f64.sqrt();
        let roots: Vec<f64> = (1..=50u64)
            .map(|k| rational_to_f64(&BigRational::from_integer(fuss_catalan(2, k).into())).powf(1.0 / (2 * k) as f64))
            .collect();
        let increasing = roots.windows(2).all(|w| w[0] < w[1]);
        let over = roots.iter().map(|r| r - sup).fold(f64::NEG_INFINITY, f64::max);
        let res = if increasing { over.max(0.0) } else { f64::INFINITY };
        Ok((res, format!("(C2_k)^(1/2k) increases toward (3/2)√3 without reaching it; k = 50 gives {}", roots[49])))
    });
}

/// Exact values a caller might want to print next to a report.
pub fn route_table(model: &OperatorModel, lambda: &BigRational, k: usize) -> Result<BTreeMap<&'static str, Vec<BigRational>>> {
    let mut out = BTreeMap::new();
    out.insert("lagrange", negative_moments_at(model, k, lambda)?);
    out.insert("psd", (0..=k).map(|j| psd::negative_moment_psd(model, lambda, j)).collect::<Result<_>>()?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_parsing() {
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert_eq!("asymptotic".parse::<Suite>().unwrap(), Suite::Asymptotic);
        assert!("everything".parse::<Suite>().is_err());
        assert!(Suite::All.includes(Suite::Analytic));
        assert!(!Suite::Analytic.includes(Suite::Asymptotic));
    }

    #[test]
    fn analytic_suite_passes() {
        let r = run(Suite::Analytic);
        assert!(r.passed, "{}", r.to_json());
        assert!(r.checks.iter().all(|c| c.suite == Suite::Analytic));
        assert_eq!(subordination_grid().len(), 20);
    }

    #[test]
    fn asymptotic_suite_passes() {
        let r = run(Suite::Asymptotic);
        assert!(r.passed, "{}", r.to_json());
    }

    #[test]
    fn injected_fault_is_caught() {
        let clean = run(Suite::Combinatorial);
        assert!(clean.passed, "{}", clean.to_json());
        assert_eq!(clean.check("triple_route_moments").unwrap().residual, 0.0);
        let bad = run_with_faults(Suite::Combinatorial, Faults { corrupt_r_coefficient: true });
        assert!(!bad.passed);
        let c = bad.check("circular_r_combinatorial").unwrap();
        assert!(!c.passed && c.detail.contains("[3]"), "{}", c.detail);
    }

    #[test]
    fn report_json_shape() {
        let r = Report {
            suite: Suite::All,
            passed: false,
            checks: vec![Check { name: "x".into(), suite: Suite::Analytic, passed: false, residual: 0.5, tolerance: 0.1, detail: String::new() }],
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["suite"], "all");
        assert_eq!(v["checks"][0]["suite"], "analytic");
        assert_eq!(v["checks"][0]["residual"], 0.5);
    }

    #[test]
    fn route_table_agrees() {
        let t = route_table(&OperatorModel::builtin(Builtin::TwoAtom), &rat(7, 5), 2).unwrap();
        assert_eq!(t["lagrange"], t["psd"]);
    }
}
