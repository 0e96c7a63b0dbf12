//! Discretized probability measures on the real line: point masses plus a
//! density sampled on a quadrature grid.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

/// Which rule produced the quadrature weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadratureRule {
    /// No continuous part.
    None,
    /// `t = c + (h/2)·cos θ` with midpoint nodes in θ; spectrally accurate
    /// for densities with square-root edges.
    ChebyshevMidpoint,
    /// Caller-supplied weights.
    User,
}

/// Atoms plus a sampled density. Integrals are
/// `Σ atoms w·f(x) + Σ_j weights[j]·density[j]·f(grid[j])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    atoms: Vec<(f64, f64)>,
    grid: Vec<f64>,
    density: Vec<f64>,
    weights: Vec<f64>,
    rule: QuadratureRule,
    /// How many density samples were clipped up to zero.
    clipped: usize,
}

impl SpectralMeasure {
    pub fn from_atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(atoms, vec![], vec![], vec![], QuadratureRule::None)
    }

    pub fn point_mass(x: f64) -> Self {
        SpectralMeasure {
            atoms: vec![(x, 1.0)],
            grid: vec![],
            density: vec![],
            weights: vec![],
            rule: QuadratureRule::None,
            clipped: 0,
        }
    }

    pub fn new(
        atoms: Vec<(f64, f64)>,
        grid: Vec<f64>,
        density: Vec<f64>,
        weights: Vec<f64>,
        rule: QuadratureRule,
    ) -> Result<Self> {
        if grid.len() != density.len() || grid.len() != weights.len() {
            return arg("grid, density and weights must have equal length");
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return arg("grid must be strictly increasing");
        }
        if density.iter().any(|&d| !(d >= 0.0)) {
            return arg("density must be non-negative");
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || atoms.iter().any(|&(x, w)| !(w >= 0.0) || !x.is_finite()) {
            return arg("weights must be non-negative and locations finite");
        }
        Ok(SpectralMeasure { atoms, grid, density, weights, rule, clipped: 0 })
    }

    pub(crate) fn with_clipped(mut self, clipped: usize) -> Self {
        self.clipped = clipped;
        self
    }

    /// Marchenko–Pastur law with unit ratio, density `√(t(4−t))/(2πt)` on
    /// `[0, 4]`, discretized with `n` nodes. Substituting `t = 4 sin²(θ/2)`
    /// turns the measure into `(2/π) cos²(θ/2) dθ` on `(0, π)`, and the
    /// midpoint rule in θ integrates polynomials of degree `< 2n` exactly.
    pub fn free_poisson(n: usize) -> Self {
        let mut grid = Vec::with_capacity(n);
        let mut density = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        // t = 4 sin²(θ/2) increases with θ
        for j in 0..n {
            let theta = (j as f64 + 0.5) * PI / n as f64;
            let half = theta / 2.0;
            let t = 4.0 * half.sin().powi(2);
            grid.push(t);
            density.push(half.cos() / half.sin() / (2.0 * PI));
            weights.push(2.0 * theta.sin() * PI / n as f64);
        }
        SpectralMeasure { atoms: vec![], grid, density, weights, rule: QuadratureRule::User, clipped: 0 }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn clipped(&self) -> usize {
        self.clipped
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let a: f64 = self.atoms.iter().map(|&(x, w)| w * f(x)).sum();
        let c: f64 = self.grid.iter().zip(&self.density).zip(&self.weights).map(|((&t, &d), &w)| w * d * f(t)).sum();
        a + c
    }

    pub fn total_mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.integrate(|t| t.powi(k))
    }

    /// Smallest and largest point carrying mass.
    pub fn support(&self) -> Option<(f64, f64)> {
        let pts = self
            .atoms
            .iter()
            .filter(|a| a.1 > 0.0)
            .map(|a| a.0)
            .chain(self.grid.iter().zip(&self.density).filter(|p| *p.1 > 0.0).map(|p| *p.0));
        pts.fold(None, |acc, x| match acc {
            None => Some((x, x)),
            Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
        })
    }

    /// Writes the `t,rho` table, numbers with 17 significant digits.
    pub fn write_density_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,rho")?;
        for (t, r) in self.grid.iter().zip(&self.density) {
            writeln!(out, "{},{}", fmt17(*t), fmt17(*r))?;
        }
        Ok(())
    }
}

/// A float rendered with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Law of `1/√t` under `meas`.
pub fn pushforward_inverse_sqrt(meas: &SpectralMeasure) -> Result<SpectralMeasure> {
    let lowest = meas.atoms.iter().map(|a| a.0).chain(meas.grid.iter().copied()).fold(f64::INFINITY, f64::min);
    if !(lowest > 0.0) {
        return Err(Error::Argument(format!("support reaches {lowest}, push-forward by 1/√t needs it inside (0, ∞)")));
    }
    let atoms = meas.atoms.iter().map(|&(x, w)| (1.0 / x.sqrt(), w)).collect();
    let n = meas.grid.len();
    let mut grid = Vec::with_capacity(n);
    let mut density = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    // u = t^(-1/2) reverses the order; |dt/du| = 2/u³
    for j in (0..n).rev() {
        let u = 1.0 / meas.grid[j].sqrt();
        let jac = 2.0 / (u * u * u);
        grid.push(u);
        density.push(meas.density[j] * jac);
        weights.push(meas.weights[j] / jac);
    }
    Ok(SpectralMeasure { atoms, grid, density, weights, rule: meas.rule, clipped: meas.clipped })
}
