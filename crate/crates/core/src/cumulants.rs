//! Free-cumulant calculus.
//!
//! A [`CumulantFunctional`] assigns an exact value to every pure-letter
//! argument list; multilinearity extends it to linear combinations of
//! letters. Moments are sums over non-crossing partitions of products of
//! block cumulants, and cumulants with products as arguments are the same
//! sums restricted to partitions that connect the product groups.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::measure::SpectralMeasure;
use crate::nc::{self, AlternationPattern, AnyBlocks, PairRule, DEFAULT_ENUMERATION_BOUND};
use crate::ring::{self, int, parse_rational, rational_to_f64, Poly, Scalar, LAMBDA, LAMBDA2};

/// A letter of the abstract alphabet.
pub type Sym = usize;

/// The circular operator `c`.
pub const C: Sym = 0;
/// Its adjoint `c*`.
pub const C_STAR: Sym = 1;

/// A formal linear combination of letters.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearLetter {
    terms: Vec<(Poly, Sym)>,
}

impl LinearLetter {
    pub fn pure(s: Sym) -> Self {
        LinearLetter { terms: vec![(Poly::one(), s)] }
    }

    pub fn combination(terms: Vec<(Poly, Sym)>) -> Self {
        LinearLetter { terms }
    }

    pub fn terms(&self) -> &[(Poly, Sym)] {
        &self.terms
    }
}

type Evaluator = dyn Fn(&[Sym]) -> Poly + Send + Sync;

/// Multilinear cumulant functionals `κ_n[x₁, …, x_n]`.
#[derive(Clone)]
pub struct CumulantFunctional {
    max_order: usize,
    pairs_only: bool,
    eval: Arc<Evaluator>,
}

impl std::fmt::Debug for CumulantFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CumulantFunctional")
            .field("max_order", &self.max_order)
            .field("pairs_only", &self.pairs_only)
            .finish()
    }
}

impl CumulantFunctional {
    pub fn new(max_order: usize, eval: impl Fn(&[Sym]) -> Poly + Send + Sync + 'static) -> Self {
        CumulantFunctional { max_order, pairs_only: false, eval: Arc::new(eval) }
    }

    /// A functional whose only non-zero cumulants have order two.
    pub fn pairs(max_order: usize, kappa2: impl Fn(Sym, Sym) -> Poly + Send + Sync + 'static) -> Self {
        let eval = move |w: &[Sym]| if w.len() == 2 { kappa2(w[0], w[1]) } else { Poly::zero() };
        CumulantFunctional { max_order, pairs_only: true, eval: Arc::new(eval) }
    }

    /// `κ₂[c, c*] = κ₂[c*, c] = 1`, everything else zero.
    pub fn circular(max_order: usize) -> Self {
        Self::pairs(max_order, |a, b| if a != b { Poly::one() } else { Poly::zero() })
    }

    /// One self-adjoint letter (`0`) with `κ_n = kappas[n − 1]`, zero beyond.
    pub fn single_variable(kappas: Vec<Poly>) -> Self {
        let max_order = kappas.len();
        Self::new(max_order, move |w| kappas.get(w.len() - 1).cloned().unwrap_or_else(Poly::zero))
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn cumulant(&self, word: &[Sym]) -> Result<Poly> {
        if word.is_empty() || word.len() > self.max_order {
            return arg(format!("cumulant of order {} outside 1..={}", word.len(), self.max_order));
        }
        Ok((self.eval)(word))
    }

    /// Sum over partitions of `{1..n}` (pairings only, when the functional
    /// vanishes off order two) of `coef(blocks)·Π_B κ[word|_B]`.
    fn partition_sum(&self, word: &[Sym], keep: impl Fn(&[Vec<usize>]) -> bool) -> Result<Poly> {
        let n = word.len();
        if n > DEFAULT_ENUMERATION_BOUND {
            return Err(Error::Resource(format!("word of length {n} exceeds enumeration bound")));
        }
        let mut memo: HashMap<Vec<Sym>, Poly> = HashMap::new();
        let mut total = Poly::zero();
        let mut failure = None;
        let mut visit = |blocks: &[Vec<usize>]| {
            if failure.is_some() || !keep(blocks) {
                return;
            }
            let mut prod = Poly::one();
            for b in blocks {
                if b.len() > self.max_order {
                    failure = Some(Error::Argument(format!("cumulant of order {} beyond {}", b.len(), self.max_order)));
                    return;
                }
                let letters: Vec<Sym> = b.iter().map(|&i| word[i - 1]).collect();
                let k = memo.entry(letters).or_insert_with_key(|l| (self.eval)(l));
                if k.is_zero() {
                    return;
                }
                prod = &prod * &*k;
            }
            total += prod;
        };
        if self.pairs_only {
            let rule = PairRule(|i: usize, j: usize| !(self.eval)(&[word[i - 1], word[j - 1]]).is_zero());
            nc::visit_with_rule(n, &rule, &mut visit);
        } else {
            nc::visit_with_rule(n, &AnyBlocks, &mut visit);
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(total),
        }
    }
}

/// Expands a word of linear combinations into weighted pure words.
fn expand_multilinear(word: &[LinearLetter]) -> Vec<(Poly, Vec<Sym>)> {
    let mut acc: Vec<(Poly, Vec<Sym>)> = vec![(Poly::one(), Vec::new())];
    for letter in word {
        let mut next = Vec::with_capacity(acc.len() * letter.terms.len());
        for (c, w) in &acc {
            for (d, s) in &letter.terms {
                let mut w2 = w.clone();
                w2.push(*s);
                next.push((c * d, w2));
            }
        }
        acc = next;
    }
    acc
}

/// `φ(x₁⋯x_n) = Σ_{π ∈ NC(n)} κ_π[x₁, …, x_n]`.
pub fn moment_from_cumulants(cf: &CumulantFunctional, word: &[LinearLetter]) -> Result<Poly> {
    let mut total = Poly::zero();
    for (c, w) in expand_multilinear(word) {
        if c.is_zero() {
            continue;
        }
        total += &c * &cf.partition_sum(&w, |_| true)?;
    }
    Ok(total)
}

/// Single-letter moments `m₁…m_K` to cumulants `κ₁…κ_K`, over any ring.
///
/// Uses `m_n = Σ_{s=1}^{n} κ_s [z^{n−s}] M(z)^s` with `M = 1 + Σ m_i z^i`,
/// which is the non-crossing moment–cumulant formula grouped by the block
/// containing the first element.
pub fn cumulants_from_moments<S: Scalar>(moments: &[S]) -> Vec<S> {
    let k = moments.len();
    let mut series = vec![S::one()];
    series.extend(moments.iter().cloned());
    // powers[s] = M^s truncated to degree k
    let mut powers: Vec<Vec<S>> = vec![{
        let mut one = vec![S::zero(); k + 1];
        one[0] = S::one();
        one
    }];
    for _ in 0..k {
        let last = powers.last().unwrap();
        powers.push(truncated_product(last, &series, k));
    }
    let mut kappa: Vec<S> = Vec::with_capacity(k);
    for n in 1..=k {
        let mut rest = S::zero();
        for (s, ks) in kappa.iter().enumerate() {
            let s = s + 1;
            rest = rest + ks.clone() * powers[s][n - s].clone();
        }
        kappa.push(moments[n - 1].clone() - rest);
    }
    kappa
}

/// Inverse of [`cumulants_from_moments`].
pub fn moments_from_cumulant_sequence<S: Scalar>(kappas: &[S]) -> Vec<S> {
    let k = kappas.len();
    let mut moments: Vec<S> = Vec::with_capacity(k);
    for n in 1..=k {
        let mut series = vec![S::one()];
        series.extend(moments.iter().cloned());
        series.push(S::zero());
        let mut power = {
            let mut one = vec![S::zero(); n + 1];
            one[0] = S::one();
            one
        };
        let mut total = S::zero();
        for s in 1..=n {
            power = truncated_product(&power, &series, n);
            total = total + kappas[s - 1].clone() * power[n - s].clone();
        }
        moments.push(total);
    }
    moments
}

fn truncated_product<S: Scalar>(a: &[S], b: &[S], deg: usize) -> Vec<S> {
    let mut out = vec![S::zero(); deg + 1];
    for (i, x) in a.iter().enumerate().take(deg + 1) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(deg + 1 - i) {
            out[i + j] = out[i + j].clone() + x.clone() * y.clone();
        }
    }
    out
}

/// `κ_n[x₁⋯x_{i₁}, …]`: cumulants whose arguments are products of
/// consecutive letters, grouped by `groups`.
pub fn product_cumulant(groups: &nc::IntervalPartition, cf: &CumulantFunctional, word: &[LinearLetter]) -> Result<Poly> {
    if groups.total() != word.len() {
        return arg(format!("groups total {} but word has {} letters", groups.total(), word.len()));
    }
    let sizes = groups.sizes().to_vec();
    let n = word.len();
    let mut total = Poly::zero();
    for (c, w) in expand_multilinear(word) {
        if c.is_zero() {
            continue;
        }
        let s = cf.partition_sum(&w, |blocks| nc::join_connects_raw(n, blocks, &sizes))?;
        total += &c * &s;
    }
    Ok(total)
}

/// The two summands of `|λ − c|² − λ²`: `α₁ = −λ(c + c*)` and `α₂ = cc*`.
fn shift_word(string: &[u8]) -> (nc::IntervalPartition, Vec<LinearLetter>) {
    let minus_lambda = Poly::monomial(int(-1), LAMBDA, 1);
    let mut sizes = Vec::with_capacity(string.len());
    let mut word = Vec::new();
    for &i in string {
        if i == 1 {
            sizes.push(1);
            word.push(LinearLetter::combination(vec![(minus_lambda.clone(), C), (minus_lambda.clone(), C_STAR)]));
        } else {
            sizes.push(2);
            word.push(LinearLetter::pure(C));
            word.push(LinearLetter::pure(C_STAR));
        }
    }
    (nc::IntervalPartition::new(sizes).expect("sizes are positive"), word)
}

/// Contribution `κ_n[α_{i₁}, …, α_{i_n}]` of one string `i ∈ {1,2}ⁿ`,
/// as a polynomial in `λ`.
pub fn circular_string_contribution(string: &[u8]) -> Result<Poly> {
    if string.iter().any(|&i| i != 1 && i != 2) {
        return arg("strings are over {1, 2}");
    }
    let (groups, word) = shift_word(string);
    product_cumulant(&groups, &CumulantFunctional::circular(2 * string.len()), &word)
}

/// `κ_n(|λ − c|²)` for `n = 1..=max_n`, as polynomials in `lam2 = λ²`,
/// by expanding over all strings and summing product cumulants.
pub fn circular_shift_cumulants(max_n: usize) -> Result<Vec<Poly>> {
    if 2 * max_n > DEFAULT_ENUMERATION_BOUND {
        return Err(Error::Resource(format!("order {max_n} exceeds enumeration bound")));
    }
    let mut out = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        let mut total = Poly::zero();
        for mask in 0..(1u32 << n) {
            let string: Vec<u8> = (0..n).map(|j| if mask >> (n - 1 - j) & 1 == 1 { 2 } else { 1 }).collect();
            total += circular_string_contribution(&string)?;
        }
        if n == 1 {
            // the constant λ² only shifts the first cumulant
            total += Poly::var(LAMBDA).pow(2);
        }
        let even = total
            .even_to_square(LAMBDA, LAMBDA2)
            .ok_or_else(|| Error::Numerical("odd power of λ survived".into()))?;
        out.push(even);
    }
    Ok(out)
}

/// `Σ_{π ∈ NC(pat)} Π_B α_{|B|/2}` with `α` supplied lazily.
pub fn rdiag_moment_with<S: Scalar>(pat: &AlternationPattern, alpha: impl Fn(usize) -> Option<S>) -> Result<S> {
    if !pat.is_balanced() {
        return Ok(S::zero());
    }
    if pat.word_len() > 2 * DEFAULT_ENUMERATION_BOUND {
        return Err(Error::Resource(format!("word of length {} exceeds enumeration bound", pat.word_len())));
    }
    let mut total = S::zero();
    let mut failure = None;
    nc::visit_alternating(pat, |blocks| {
        if failure.is_some() {
            return;
        }
        let mut prod = S::one();
        for b in blocks {
            match alpha(b.len() / 2) {
                Some(a) => prod = prod * a,
                None => {
                    failure = Some(b.len() / 2);
                    return;
                }
            }
        }
        total = total.clone() + prod;
    });
    match failure {
        Some(l) => arg(format!("pattern needs α_{l}, beyond the model's order")),
        None => Ok(total),
    }
}

/// `φ(a^{*n₀} a^{m₀} ⋯)` for an R-diagonal `a` with determining sequence `α`.
pub fn rdiag_moment(model: &OperatorModel, pat: &AlternationPattern) -> Result<BigRational> {
    rdiag_moment_with(pat, |l| model.alpha(l))
}

/// Built-in operator models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    Circular,
    Haar,
    TwoAtom,
}

impl std::str::FromStr for Builtin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circular" => Ok(Builtin::Circular),
            "haar" => Ok(Builtin::Haar),
            "two-atom" | "two_atom" => Ok(Builtin::TwoAtom),
            other => Err(Error::Parse(format!("unknown builtin model '{other}'"))),
        }
    }
}

/// Default number of determining cumulants carried by a model.
pub const DEFAULT_ORDER: usize = 8;

/// An R-diagonal operator `a`, normalized so that `φ(aa*) = 1`.
#[derive(Clone, Debug)]
pub struct OperatorModel {
    name: String,
    builtin: Option<Builtin>,
    alpha: Vec<BigRational>,
    mu_even_cumulants: Vec<BigRational>,
    aa_star_measure: Option<SpectralMeasure>,
    /// Orders (of `κ_{2n}(μ)`) that were supplied by the user and could not
    /// be tied to `α` by a relation the model enforces.
    user_asserted: Vec<usize>,
}

impl OperatorModel {
    pub fn builtin(b: Builtin) -> Self {
        Self::builtin_with_order(b, DEFAULT_ORDER)
    }

    pub fn builtin_with_order(b: Builtin, order: usize) -> Self {
        let order = order.max(2);
        match b {
            Builtin::Circular => {
                let mut alpha = vec![int(0); order];
                alpha[0] = int(1);
                OperatorModel {
                    name: "circular".into(),
                    builtin: Some(b),
                    mu_even_cumulants: alpha.clone(),
                    alpha,
                    aa_star_measure: Some(SpectralMeasure::free_poisson(512)),
                    user_asserted: vec![],
                }
            }
            Builtin::Haar => {
                let moments = vec![int(1); order];
                let mut m = Self::from_aa_star_moments("haar", &moments).expect("Haar moments are valid");
                m.builtin = Some(b);
                m.aa_star_measure = Some(SpectralMeasure::point_mass(1.0));
                m
            }
            Builtin::TwoAtom => {
                let moments: Vec<BigRational> =
                    (1..=order).map(|n| BigRational::from_integer(BigInt::from(2).pow(n as u32 - 1))).collect();
                let mut m = Self::from_aa_star_moments("two-atom", &moments).expect("two-atom moments are valid");
                m.builtin = Some(b);
                m.aa_star_measure = Some(SpectralMeasure::from_atoms(vec![(0.0, 0.5), (2.0, 0.5)]).unwrap());
                m
            }
        }
    }

    /// Derives `α` and `κ_{2n}(μ)` from the moments `φ((aa*)ⁿ)`, `n = 1..=K`.
    pub fn from_aa_star_moments(name: &str, moments: &[BigRational]) -> Result<Self> {
        if moments.is_empty() || !moments[0].is_one() {
            return arg("normalization requires φ(aa*) = 1");
        }
        let alpha = alpha_from_moments(moments)?;
        let mu = mu_cumulants_from_aa_moments(moments);
        let model = OperatorModel {
            name: name.into(),
            builtin: None,
            alpha,
            mu_even_cumulants: mu,
            aa_star_measure: None,
            user_asserted: vec![],
        };
        model.check_invariants()?;
        Ok(model)
    }

    /// From a determining sequence `α₁ = 1, α₂, …`; `κ_{2n}(μ)` is derived
    /// through the moments `φ((aa*)ⁿ)` unless supplied.
    pub fn from_alpha(name: &str, alpha: Vec<BigRational>, mu: Option<Vec<BigRational>>) -> Result<Self> {
        if alpha.is_empty() || !alpha[0].is_one() {
            return arg("α₁ must equal 1");
        }
        let moments = aa_star_moments_from_alpha(&alpha)?;
        let derived = mu_cumulants_from_aa_moments(&moments);
        let mut user_asserted = vec![];
        let mu_even = match mu {
            None => derived,
            Some(given) => {
                if given.is_empty() || !given[0].is_one() {
                    return arg("κ₂(μ) must equal 1");
                }
                if alpha.len() >= 2 && given.len() >= 2 && given[1] != alpha[1] {
                    return arg(format!(
                        "κ₄(μ) = {} contradicts ‖a‖₄⁴ − 2 = α₂ = {}",
                        ring::rational_to_string(&given[1]),
                        ring::rational_to_string(&alpha[1])
                    ));
                }
                for (i, g) in given.iter().enumerate().skip(2) {
                    if derived.get(i) != Some(g) {
                        log::warn!("κ_{}(μ) is user-asserted and disagrees with the moment route", 2 * (i + 1));
                        user_asserted.push(2 * (i + 1));
                    }
                }
                given
            }
        };
        let model = OperatorModel {
            name: name.into(),
            builtin: None,
            alpha,
            mu_even_cumulants: mu_even,
            aa_star_measure: None,
            user_asserted,
        };
        model.check_invariants()?;
        Ok(model)
    }

    pub fn with_aa_star_measure(mut self, meas: SpectralMeasure) -> Result<Self> {
        let moments = self.aa_star_moments()?;
        for (n, m) in moments.iter().enumerate() {
            let q = meas.moment(n as i32 + 1);
            let expect = rational_to_f64(m);
            if (q - expect).abs() > 1e-8 * expect.abs().max(1.0) {
                return arg(format!(
                    "measure moment φ((aa*)^{}) = {q} disagrees with the cumulant value {expect}",
                    n + 1
                ));
            }
        }
        self.aa_star_measure = Some(meas);
        Ok(self)
    }

    fn check_invariants(&self) -> Result<()> {
        if !self.alpha[0].is_one() {
            return arg("α₁ must equal 1");
        }
        if let Some(v) = self.v_exact() {
            if v.is_negative() {
                return arg("v(a) = α₂ + 1 must be non-negative");
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn builtin_kind(&self) -> Option<Builtin> {
        self.builtin
    }

    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    /// `α_ℓ(a)`, one-based. The circular model is exact at every order.
    pub fn alpha(&self, l: usize) -> Option<BigRational> {
        if l == 0 {
            return None;
        }
        match self.alpha.get(l - 1) {
            Some(a) => Some(a.clone()),
            None if self.builtin == Some(Builtin::Circular) => Some(int(0)),
            None => None,
        }
    }

    pub fn alphas(&self) -> &[BigRational] {
        &self.alpha
    }

    /// `κ_{2n}(μ)`, one-based in `n`.
    pub fn mu_cumulant(&self, n: usize) -> Option<BigRational> {
        if n == 0 {
            return None;
        }
        match self.mu_even_cumulants.get(n - 1) {
            Some(a) => Some(a.clone()),
            None if self.builtin == Some(Builtin::Circular) => Some(int(0)),
            None => None,
        }
    }

    pub fn mu_even_cumulants(&self) -> &[BigRational] {
        &self.mu_even_cumulants
    }

    pub fn user_asserted_orders(&self) -> &[usize] {
        &self.user_asserted
    }

    /// `R_μ(z) = Σ κ_{2n}(μ) z^{2n−1}` is known in closed form.
    pub fn has_closed_form_r(&self) -> bool {
        self.builtin == Some(Builtin::Circular)
    }

    pub fn aa_star_measure(&self) -> Option<&SpectralMeasure> {
        self.aa_star_measure.as_ref()
    }

    /// `φ((aa*)ⁿ)` for `n = 1..=K`.
    pub fn aa_star_moments(&self) -> Result<Vec<BigRational>> {
        aa_star_moments_from_alpha(&self.alpha)
    }

    fn v_exact(&self) -> Option<BigRational> {
        self.alpha(2).map(|a| a + int(1))
    }

    /// `v(a) = ‖a‖₄⁴ − 1 = α₂ + 1`.
    pub fn v(&self) -> Result<BigRational> {
        self.v_exact().ok_or_else(|| Error::Argument("model lacks α₂, v(a) is undefined".into()))
    }

    pub fn v_f64(&self) -> Result<f64> {
        self.v().map(|v| rational_to_f64(&v))
    }
}

/// `φ((aa*)ⁿ) = φ((a*a)ⁿ)` via the alternating moment formula.
fn aa_star_moments_from_alpha(alpha: &[BigRational]) -> Result<Vec<BigRational>> {
    (1..=alpha.len())
        .map(|n| rdiag_moment_with(&AlternationPattern::alternating_power(n), |l| alpha.get(l.wrapping_sub(1)).cloned()))
        .collect()
}

/// Triangular solve: the single-block partition contributes `α_n` itself.
fn alpha_from_moments(moments: &[BigRational]) -> Result<Vec<BigRational>> {
    let mut alpha: Vec<BigRational> = Vec::with_capacity(moments.len());
    for (i, m) in moments.iter().enumerate() {
        let n = i + 1;
        let rest = rdiag_moment_with(&AlternationPattern::alternating_power(n), |l| {
            if l == n {
                Some(int(0))
            } else {
                alpha.get(l - 1).cloned()
            }
        })?;
        alpha.push(m - rest);
    }
    Ok(alpha)
}

/// Even cumulants of the symmetrized modulus, whose moments are
/// `m_{2n}(μ) = φ((aa*)ⁿ)` and vanish at odd orders.
fn mu_cumulants_from_aa_moments(moments: &[BigRational]) -> Vec<BigRational> {
    let mut full = Vec::with_capacity(2 * moments.len());
    for m in moments {
        full.push(int(0));
        full.push(m.clone());
    }
    cumulants_from_moments(&full).into_iter().skip(1).step_by(2).collect()
}

/// JSON description of a model.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub builtin: Option<Builtin>,
    #[serde(default)]
    pub alpha: Option<Vec<String>>,
    #[serde(default)]
    pub mu_even_cumulants: Option<Vec<String>>,
    #[serde(default)]
    pub aa_star_measure: Option<MeasureSpec>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    #[serde(default)]
    pub density_grid: Option<DensityGridSpec>,
}

/// A point mass; `x` and `w` are numbers or `"p/q"` strings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomSpec {
    pub x: serde_json::Value,
    pub w: serde_json::Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityGridSpec {
    pub t: Vec<f64>,
    pub rho: Vec<f64>,
    pub weights: Vec<f64>,
}

fn json_rational(v: &serde_json::Value) -> Result<BigRational> {
    let s = match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Number(n) => n.to_string(),
        other => return Err(Error::Parse(format!("expected a number or \"p/q\" string, got {other}"))),
    };
    parse_rational(&s).ok_or_else(|| Error::Parse(format!("cannot parse '{s}' as an exact rational")))
}

fn parse_list(items: &[String]) -> Result<Vec<BigRational>> {
    items
        .iter()
        .map(|s| parse_rational(s).ok_or_else(|| Error::Parse(format!("cannot parse '{s}' as p/q"))))
        .collect()
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn into_model(self) -> Result<OperatorModel> {
        if let Some(b) = self.builtin {
            let mut m = OperatorModel::builtin(b);
            if let Some(n) = self.name {
                m.name = n;
            }
            return Ok(m);
        }
        let name = self.name.unwrap_or_else(|| "custom".into());
        let measure = match &self.aa_star_measure {
            None => None,
            Some(ms) => {
                let atoms: Vec<(BigRational, BigRational)> = ms
                    .atoms
                    .iter()
                    .map(|a| Ok((json_rational(&a.x)?, json_rational(&a.w)?)))
                    .collect::<Result<_>>()?;
                Some((atoms, ms.density_grid.clone()))
            }
        };
        let mut model = match (&self.alpha, &measure) {
            (Some(alpha), _) => {
                let mu = self.mu_even_cumulants.as_deref().map(parse_list).transpose()?;
                OperatorModel::from_alpha(&name, parse_list(alpha)?, mu)?
            }
            (None, Some((atoms, None))) if !atoms.is_empty() => {
                // a purely atomic law has exact moments
                let total: BigRational = atoms.iter().map(|a| a.1.clone()).sum();
                if !total.is_one() {
                    return arg("atom weights must sum to 1");
                }
                let moments: Vec<BigRational> = (1..=DEFAULT_ORDER)
                    .map(|n| atoms.iter().map(|(x, w)| w * num_traits::pow(x.clone(), n)).sum())
                    .collect();
                OperatorModel::from_aa_star_moments(&name, &moments)?
            }
            _ => return arg("model needs a builtin tag, an alpha list, or a purely atomic aa* measure"),
        };
        if let Some((atoms, grid)) = measure {
            let atoms_f: Vec<(f64, f64)> = atoms.iter().map(|(x, w)| (rational_to_f64(x), rational_to_f64(w))).collect();
            let meas = match grid {
                None => SpectralMeasure::from_atoms(atoms_f)?,
                Some(g) => SpectralMeasure::new(atoms_f, g.t, g.rho, g.weights, crate::measure::QuadratureRule::User)?,
            };
            model = model.with_aa_star_measure(meas)?;
        }
        Ok(model)
    }
}
