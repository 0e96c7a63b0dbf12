//! Partition structure diagrams.
//!
//! A word `a*^{n₀} a^{m₀} ⋯ a*^{n_k} a^{m_k}` has `2(k+1)` runs, drawn as
//! vertices `0, 1, …, 2k+1` around a disc: even vertices are the `a*` runs
//! (written `(j,1)`), odd vertices the `a` runs (written `(j,*)`). A block of
//! an alternating non-crossing partition touches each run at most once, so it
//! compresses to an inscribed polygon whose vertices alternate in parity.
//! Non-crossing blocks give non-crossing polygons, and nested pairs between
//! the same two runs collapse onto one 2-gon carrying a multiplicity label.
//! The map is a bijection onto validly labelled diagrams, which turns the
//! negative moments `m_{−2k−2}(μ_λ)` into a finite sum over diagrams.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::cumulants::OperatorModel;
use crate::error::{arg, Error, Result};
use crate::nc::{enumerate_alternating, AlternationPattern, SetPartition};
use crate::ring::{int, rational_to_string, Poly, RationalFunction, LAMBDA2};

/// Largest `k` accepted by diagram enumeration (`2k + 2 = 10` vertices,
/// 6 550 528 diagrams).
pub const PSD_ENUMERATION_BOUND: usize = 4;
/// Largest `k` accepted by the quadrangulation counter.
pub const QUADRANGULATION_BOUND: usize = 6;

/// Variable standing for `1/(λ² − 1)`.
pub const X: &str = "x";
/// Variable standing for `1/λ²`.
pub const Y: &str = "y";

/// Name of the indeterminate used for `α_ℓ` in symbolic polynomials.
pub fn alpha_symbol(l: usize) -> String {
    format!("alpha{l}")
}

/// `(j,1)` for an `a*` run, `(j,*)` for an `a` run, `j` counted from 1.
pub fn vertex_label(v: usize) -> String {
    if v.is_multiple_of(2) {
        format!("({},1)", v / 2 + 1)
    } else {
        format!("({},*)", v / 2 + 1)
    }
}

/// An inscribed polygon: ascending vertex indices of alternating parity.
/// Two vertices make a 2-gon (a chord).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<usize>,
}

impl Polygon {
    pub fn new(vertices: Vec<usize>) -> Result<Self> {
        if vertices.len() < 2 || !vertices.len().is_multiple_of(2) {
            return arg(format!("a polygon needs an even number ≥ 2 of vertices, got {vertices:?}"));
        }
        if vertices.windows(2).any(|w| w[0] >= w[1]) {
            return arg(format!("polygon vertices must be strictly ascending: {vertices:?}"));
        }
        if vertices.windows(2).any(|w| (w[0] + w[1]) % 2 == 0) {
            return arg(format!("every edge must join a 1-vertex to a *-vertex: {vertices:?}"));
        }
        Ok(Polygon { vertices })
    }

    fn from_mask(mask: u32) -> Self {
        Polygon { vertices: (0..32).filter(|v| mask >> v & 1 == 1).collect() }
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Number of sides; a 2-gon has two.
    pub fn sides(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() == 2
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    /// The vertex following `v` in cyclic order.
    fn next_after(&self, v: usize) -> usize {
        let i = self.vertices.binary_search(&v).expect("vertex of polygon");
        self.vertices[(i + 1) % self.vertices.len()]
    }

    /// Is every vertex of `other` on the closed arc from `a` forward to `b`?
    fn within_arc(&self, a: usize, b: usize, n: usize) -> bool {
        let span = (b + n - a) % n;
        self.vertices.iter().all(|&x| (x + n - a) % n <= span)
    }

    /// Can both polygons be blocks of one non-crossing partition? True when
    /// one of them fits between two cyclically consecutive vertices of the
    /// other. A 2-gon running through the inside of a larger polygon fails.
    pub fn compatible(&self, other: &Polygon, n: usize) -> bool {
        let fits = |p: &Polygon, q: &Polygon| {
            let v = &p.vertices;
            (0..v.len()).any(|i| q.within_arc(v[i], v[(i + 1) % v.len()], n))
        };
        fits(self, other) || fits(other, self)
    }
}

impl fmt::Display for Polygon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.vertices.iter().map(|&v| vertex_label(v)).collect();
        write!(f, "[{}]", names.join(" "))
    }
}

/// Block profile: `counts[ℓ − 1]` is the number of blocks (or polygons) of
/// size `2ℓ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Profile {
    counts: Vec<usize>,
}

impl Profile {
    pub fn new(counts: Vec<usize>) -> Self {
        Profile { counts }
    }

    /// Profile of a partition whose blocks all have even size.
    pub fn of_partition(p: &SetPartition, k: usize) -> Result<Self> {
        let mut counts = vec![0; k + 1];
        for b in p.blocks() {
            let l = b.len() / 2;
            if b.len() % 2 != 0 || l == 0 || l > k + 1 {
                return arg(format!("block {b:?} does not fit a profile with k = {k}"));
            }
            counts[l - 1] += 1;
        }
        Ok(Profile { counts })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// `ε = 2 Σ_ℓ ℓ·p_ℓ`, the word length.
    pub fn epsilon(&self) -> usize {
        2 * self.counts.iter().enumerate().map(|(i, c)| (i + 1) * c).sum::<usize>()
    }
}

/// A set of pairwise non-crossing, pairwise distinct polygons on `2(k+1)`
/// vertices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PSDiagram {
    k: usize,
    polygons: Vec<Polygon>,
}

impl PSDiagram {
    /// Validates and sorts.
    pub fn new(k: usize, mut polygons: Vec<Polygon>) -> Result<Self> {
        let n = 2 * (k + 1);
        if let Some(p) = polygons.iter().find(|p| p.vertices.last().is_some_and(|&v| v >= n)) {
            return arg(format!("polygon {p} has a vertex beyond the {n} available"));
        }
        polygons.sort();
        if polygons.windows(2).any(|w| w[0] == w[1]) {
            return arg("polygons must be distinct; multiplicity belongs in labels");
        }
        for (i, p) in polygons.iter().enumerate() {
            for q in &polygons[i + 1..] {
                if !p.compatible(q, n) {
                    return arg(format!("polygons {p} and {q} cross"));
                }
            }
        }
        Ok(PSDiagram { k, polygons })
    }

    pub fn empty(k: usize) -> Self {
        PSDiagram { k, polygons: vec![] }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_vertices(&self) -> usize {
        2 * (self.k + 1)
    }

    pub fn polygons(&self) -> &[Polygon] {
        &self.polygons
    }

    /// `(s₁, …, s_{k+1})`: how many 2-gons, 4-gons, … the diagram has.
    pub fn shape(&self) -> Profile {
        let mut counts = vec![0; self.k + 1];
        for p in &self.polygons {
            counts[p.sides() / 2 - 1] += 1;
        }
        Profile { counts }
    }
}

impl fmt::Display for PSDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.polygons.iter().map(|p| p.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// A diagram with a positive label per polygon. Valid labelings put 1 on
/// every polygon with more than two sides.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledPSD {
    diagram: PSDiagram,
    labels: Vec<usize>,
}

impl LabeledPSD {
    /// `labels[i]` belongs to `diagram.polygons()[i]`.
    pub fn new(diagram: PSDiagram, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != diagram.polygons.len() {
            return arg("one label per polygon is required");
        }
        for (p, &l) in diagram.polygons.iter().zip(&labels) {
            if l == 0 {
                return arg(format!("polygon {p} has label 0; absent polygons are left out instead"));
            }
            if !p.is_degenerate() && l != 1 {
                return arg(format!("polygon {p} has {} sides and label {l}; only 2-gons take labels above 1", p.sides()));
            }
        }
        Ok(LabeledPSD { diagram, labels })
    }

    pub fn diagram(&self) -> &PSDiagram {
        &self.diagram
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_of(&self, p: &Polygon) -> usize {
        self.diagram.polygons.binary_search(p).map(|i| self.labels[i]).unwrap_or(0)
    }

    /// Profile of the partition this diagram decompresses to.
    pub fn profile(&self) -> Profile {
        let mut counts = vec![0; self.diagram.k + 1];
        for (p, &l) in self.diagram.polygons.iter().zip(&self.labels) {
            counts[p.sides() / 2 - 1] += l;
        }
        Profile { counts }
    }

    /// `ε(D, L) = Σ_P L(P)·|P|`.
    pub fn epsilon(&self) -> usize {
        self.diagram.polygons.iter().zip(&self.labels).map(|(p, l)| p.sides() * l).sum()
    }

    /// Label-weighted vertex degrees: the run lengths of the preimage.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.diagram.num_vertices()];
        for (p, &l) in self.diagram.polygons.iter().zip(&self.labels) {
            for &v in &p.vertices {
                d[v] += l;
            }
        }
        d
    }
}

/// Collapses an alternating non-crossing partition of `pat`'s word onto the
/// run disc.
pub fn compress(pat: &AlternationPattern, p: &SetPartition) -> Result<LabeledPSD> {
    let runs = pat.runs();
    if runs.is_empty() || !runs.len().is_multiple_of(2) {
        return arg("the pattern needs an even, positive number of runs");
    }
    if p.n() != pat.word_len() {
        return arg(format!("partition of {} points against a word of length {}", p.n(), pat.word_len()));
    }
    if !p.is_noncrossing() {
        return arg("partition is crossing");
    }
    let k = runs.len() / 2 - 1;
    let n = runs.len();
    let mut run_of = Vec::with_capacity(p.n() + 1);
    run_of.push(usize::MAX);
    for (r, &len) in runs.iter().enumerate() {
        run_of.extend(std::iter::repeat_n(r, len));
    }
    let mut labels: BTreeMap<Polygon, usize> = BTreeMap::new();
    for b in p.blocks() {
        let verts: Vec<usize> = b.iter().map(|&x| run_of[x]).collect();
        let alternating = b.len() % 2 == 0 && (0..b.len()).all(|i| (verts[i] + verts[(i + 1) % b.len()]) % 2 == 1);
        if !alternating {
            return arg(format!("block {b:?} does not alternate between a* and a"));
        }
        *labels.entry(Polygon::new(verts)?).or_default() += 1;
    }
    if let Some((poly, l)) = labels.iter().find(|(q, l)| !q.is_degenerate() && **l > 1) {
        return arg(format!("{l} blocks share the polygon {poly}, so they cross"));
    }
    let (polygons, labels): (Vec<Polygon>, Vec<usize>) = labels.into_iter().unzip();
    for (i, a) in polygons.iter().enumerate() {
        for b in &polygons[i + 1..] {
            if !a.compatible(b, n) {
                return Err(Error::Argument(format!("polygons {a} and {b} cross")));
            }
        }
    }
    LabeledPSD::new(PSDiagram { k, polygons }, labels)
}

/// Rebuilds the unique pattern and partition compressing to `lp`.
///
/// Each 2-gon of label `L` becomes `L` nested pairs. At a shared vertex `v`,
/// the block of `P` comes before the block of `Q` exactly when `Q` lies on
/// the arc from `v` to `P`'s next vertex, i.e. inside the gap `P` leaves.
pub fn decompress(lp: &LabeledPSD) -> Result<(AlternationPattern, SetPartition)> {
    let lp = LabeledPSD::new(lp.diagram.clone(), lp.labels.clone())?;
    let polys = &lp.diagram.polygons;
    let n = lp.diagram.num_vertices();
    let degrees = lp.degrees();
    let mut offset = vec![1; n + 1];
    for v in 0..n {
        offset[v + 1] = offset[v] + degrees[v];
    }
    // one slot per (polygon, copy) at each of the polygon's vertices
    let mut copies: Vec<(usize, usize)> = Vec::new();
    for (i, &l) in lp.labels.iter().enumerate() {
        copies.extend((0..l).map(|c| (i, c)));
    }
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); copies.len()];
    for v in 0..n {
        let mut here: Vec<usize> = (0..copies.len()).filter(|&c| polys[copies[c].0].contains(v)).collect();
        here.sort_by(|&a, &b| order_at(v, copies[a], copies[b], polys, n));
        for (slot, c) in here.into_iter().enumerate() {
            blocks[c].push(offset[v] + slot);
        }
    }
    let total = offset[n] - 1;
    Ok((AlternationPattern::new(degrees), SetPartition::new(total, blocks)?))
}

fn order_at(v: usize, a: (usize, usize), b: (usize, usize), polys: &[Polygon], n: usize) -> Ordering {
    if a.0 == b.0 {
        let p = &polys[a.0];
        // nested copies of a chord: outermost first at its lower end
        return if v == p.vertices[0] { a.1.cmp(&b.1) } else { b.1.cmp(&a.1) };
    }
    let (p, q) = (&polys[a.0], &polys[b.0]);
    if q.within_arc(v, p.next_after(v), n) {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// Candidate polygons on `2(k+1)` vertices and their compatibility, as
/// bit sets for the enumerators.
struct Catalog {
    polygons: Vec<u32>,
    sides: Vec<usize>,
    compat: Vec<u128>,
}

fn catalog(k: usize) -> Catalog {
    let n = 2 * (k + 1);
    let mut polygons = Vec::new();
    for mask in 1u32..(1 << n) {
        let p = Polygon::from_mask(mask);
        if p.sides().is_multiple_of(2) && p.vertices.windows(2).all(|w| (w[0] + w[1]) % 2 == 1) {
            polygons.push(mask);
        }
    }
    polygons.sort_by_key(|&m| Polygon::from_mask(m));
    let full: Vec<Polygon> = polygons.iter().map(|&m| Polygon::from_mask(m)).collect();
    assert!(full.len() <= 128, "catalog too large for bit sets");
    let compat = (0..full.len())
        .map(|i| (0..full.len()).filter(|&j| j != i && full[i].compatible(&full[j], n)).fold(0u128, |m, j| m | 1 << j))
        .collect();
    let sides = full.iter().map(|p| p.sides()).collect();
    Catalog { polygons, sides, compat }
}

fn check_psd_bound(k: usize) -> Result<()> {
    if k > PSD_ENUMERATION_BOUND {
        return Err(Error::Resource(format!("diagram enumeration is limited to k ≤ {PSD_ENUMERATION_BOUND}, got {k}")));
    }
    Ok(())
}

fn full_set(len: usize) -> u128 {
    if len == 128 {
        u128::MAX
    } else {
        (1u128 << len) - 1
    }
}

/// Lazily yields every diagram in `PSD_{k+1}`, the empty one first.
pub struct PsdIter {
    k: usize,
    catalog: Catalog,
    chosen: Vec<usize>,
    frames: Vec<u128>,
    started: bool,
}

impl Iterator for PsdIter {
    type Item = PSDiagram;

    fn next(&mut self) -> Option<PSDiagram> {
        if !self.started {
            self.started = true;
            self.frames.push(full_set(self.catalog.polygons.len()));
            return Some(PSDiagram::empty(self.k));
        }
        loop {
            let top = self.frames.last_mut()?;
            if *top == 0 {
                self.frames.pop();
                if self.frames.is_empty() {
                    return None;
                }
                self.chosen.pop();
                continue;
            }
            let j = top.trailing_zeros() as usize;
            *top &= !(1u128 << j);
            let rest = *top & self.catalog.compat[j];
            self.chosen.push(j);
            self.frames.push(rest);
            let polygons = self.chosen.iter().map(|&i| Polygon::from_mask(self.catalog.polygons[i])).collect();
            return Some(PSDiagram { k: self.k, polygons });
        }
    }
}

pub fn enumerate_psd(k: usize) -> Result<PsdIter> {
    check_psd_bound(k)?;
    Ok(PsdIter { k, catalog: catalog(k), chosen: Vec::new(), frames: Vec::new(), started: false })
}

/// Number of diagrams in `PSD_{k+1}` for each shape `(s₁, …, s_{k+1})`.
pub type ShapeHistogram = BTreeMap<Profile, u64>;

static HISTOGRAMS: [OnceLock<ShapeHistogram>; PSD_ENUMERATION_BOUND + 1] = [const { OnceLock::new() }; PSD_ENUMERATION_BOUND + 1];

/// Shape counts over all of `PSD_{k+1}`, computed once per `k`. The top
/// level is split by the lowest-indexed polygon across threads.
pub fn shape_histogram(k: usize) -> Result<&'static ShapeHistogram> {
    check_psd_bound(k)?;
    Ok(HISTOGRAMS[k].get_or_init(|| build_histogram(k)))
}

fn build_histogram(k: usize) -> ShapeHistogram {
    let cat = catalog(k);
    let all = full_set(cat.polygons.len());
    let tally = |first: Option<usize>| {
        let mut counts: HashMap<u64, u64> = HashMap::new();
        let mut shape = vec![0usize; k + 1];
        match first {
            None => *counts.entry(0).or_default() += 1,
            Some(j) => {
                shape[cat.sides[j] / 2 - 1] += 1;
                let rest = (all & !((2u128 << j) - 1)) & cat.compat[j];
                count_shapes(&cat, rest, &mut shape, &mut counts);
            }
        }
        counts
    };
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(cat.polygons.len().max(1));
    let mut merged: HashMap<u64, u64> = HashMap::new();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let tally = &tally;
                let len = cat.polygons.len();
                s.spawn(move || {
                    let mut local: HashMap<u64, u64> = if t == 0 { tally(None) } else { HashMap::new() };
                    for j in (t..len).step_by(threads) {
                        for (key, c) in tally(Some(j)) {
                            *local.entry(key).or_default() += c;
                        }
                    }
                    local
                })
            })
            .collect();
        for h in handles {
            for (key, c) in h.join().expect("enumeration thread panicked") {
                *merged.entry(key).or_default() += c;
            }
        }
    });
    merged.into_iter().map(|(key, c)| (unpack_shape(key, k), c)).collect()
}

fn pack_shape(shape: &[usize]) -> u64 {
    shape.iter().rev().fold(0, |acc, &s| acc << 8 | s as u64)
}

fn unpack_shape(mut key: u64, k: usize) -> Profile {
    let mut counts = Vec::with_capacity(k + 1);
    for _ in 0..=k {
        counts.push((key & 0xff) as usize);
        key >>= 8;
    }
    Profile { counts }
}

fn count_shapes(cat: &Catalog, cand: u128, shape: &mut [usize], counts: &mut HashMap<u64, u64>) {
    *counts.entry(pack_shape(shape)).or_default() += 1;
    let mut rest = cand;
    while rest != 0 {
        let j = rest.trailing_zeros() as usize;
        rest &= !(1u128 << j);
        let idx = cat.sides[j] / 2 - 1;
        shape[idx] += 1;
        count_shapes(cat, rest & cat.compat[j], shape, counts);
        shape[idx] -= 1;
    }
}

/// Run vectors for `2(k+1)` runs whose `a*`-runs and `a`-runs each hold
/// `half` letters. Runs may be empty.
pub fn balanced_patterns(k: usize, half: usize) -> Vec<AlternationPattern> {
    fn comps(parts: usize, total: usize) -> Vec<Vec<usize>> {
        if parts == 0 {
            return if total == 0 { vec![vec![]] } else { vec![] };
        }
        (0..=total)
            .flat_map(|first| {
                comps(parts - 1, total - first).into_iter().map(move |mut r| {
                    r.insert(0, first);
                    r
                })
            })
            .collect()
    }
    let sides = comps(k + 1, half);
    let mut out = Vec::with_capacity(sides.len() * sides.len());
    for n in &sides {
        for m in &sides {
            out.push(AlternationPattern::new(n.iter().zip(m).flat_map(|(&a, &b)| [a, b]).collect()));
        }
    }
    out
}

/// Outcome of the exhaustive compress/decompress check, per `k`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BijectionStats {
    pub k: usize,
    /// `(pattern, partition)` pairs visited.
    pub pairs: u64,
    /// Pairs whose round trip or profile disagreed, or whose image repeated.
    pub failures: u64,
    /// Labelled diagrams with `ε ≤ max_word_len`, counted independently.
    pub labelled: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BijectionReport {
    pub per_k: Vec<BijectionStats>,
}

impl BijectionReport {
    pub fn ok(&self) -> bool {
        self.per_k.iter().all(|s| s.failures == 0 && s.pairs == s.labelled)
    }
}

/// Round-trips every alternating non-crossing partition of every balanced
/// pattern with `2(k+1)` runs and word length `≤ max_word_len`, for all
/// `k ≤ k_max`, and compares the number of pairs against a direct count of
/// labelled diagrams.
pub fn verify_bijection(k_max: usize, max_word_len: usize) -> Result<BijectionReport> {
    let mut report = BijectionReport::default();
    for k in 0..=k_max {
        let mut stats = BijectionStats { k, ..Default::default() };
        let mut images = std::collections::HashSet::new();
        for half in 0..=max_word_len / 2 {
            for pat in balanced_patterns(k, half) {
                for p in enumerate_alternating(&pat) {
                    stats.pairs += 1;
                    let good = match compress(&pat, &p) {
                        Ok(lp) => {
                            let round = decompress(&lp).map(|(pat2, p2)| pat2 == pat && p2 == p).unwrap_or(false);
                            let profile = Profile::of_partition(&p, k).map(|pr| pr == lp.profile()).unwrap_or(false);
                            round && profile && lp.epsilon() == pat.word_len() && images.insert(lp)
                        }
                        Err(_) => false,
                    };
                    if !good {
                        stats.failures += 1;
                    }
                }
            }
        }
        let labelled: BigUint = enumerate_psd(k)?.map(|d| count_labelings(&d, max_word_len)).sum();
        stats.labelled = labelled.try_into().map_err(|_| Error::Resource("labelled count overflows u64".into()))?;
        report.per_k.push(stats);
    }
    Ok(report)
}

/// `Π_{k+1}(s₁, …)`: the number of diagrams with `s₁` 2-gons, `s₂` 4-gons
/// and so on. Missing trailing entries count as zero.
pub fn profile_count(k: usize, s: &[usize]) -> Result<BigUint> {
    let hist = shape_histogram(k)?;
    if s.len() > k + 1 && s[k + 1..].iter().any(|&x| x > 0) {
        return Ok(BigUint::zero());
    }
    let mut counts = s.iter().take(k + 1).copied().collect::<Vec<_>>();
    counts.resize(k + 1, 0);
    Ok(BigUint::from(hist.get(&Profile { counts }).copied().unwrap_or(0)))
}

/// Every tiling of the `2(k+1)`-gon by 4-gons with vertices of alternating
/// parity, each given as its set of segments (sides and diagonals).
pub fn quadrangulations(k: usize) -> Result<Vec<BTreeSet<(usize, usize)>>> {
    if k > QUADRANGULATION_BOUND {
        return Err(Error::Resource(format!("quadrangulations are limited to k ≤ {QUADRANGULATION_BOUND}, got {k}")));
    }
    Ok(tilings(0, 2 * k + 1))
}

/// Tilings of the polygon on the consecutive vertices `lo..=hi`, rooted at
/// the side `(lo, hi)` and the 4-gon `(lo, a, b, hi)` resting on it.
fn tilings(lo: usize, hi: usize) -> Vec<BTreeSet<(usize, usize)>> {
    if hi == lo + 1 {
        return vec![BTreeSet::from([(lo, hi)])];
    }
    let mut out = Vec::new();
    for a in (lo + 1..hi).step_by(2) {
        for b in (a + 1..hi).step_by(2) {
            for left in tilings(lo, a) {
                for mid in tilings(a, b) {
                    for right in tilings(b, hi) {
                        let mut segs = left.clone();
                        segs.extend(mid.iter().copied());
                        segs.extend(right.iter().copied());
                        segs.insert((lo, hi));
                        out.push(segs);
                    }
                }
            }
        }
    }
    out
}

/// The number of 4-gon tilings of `V_{k+1}`; checks that each one uses
/// exactly `3k + 1` segments.
pub fn count_quadrangulations(k: usize) -> Result<BigUint> {
    let all = quadrangulations(k)?;
    if let Some(t) = all.iter().find(|t| t.len() != 3 * k + 1) {
        return Err(Error::Numerical(format!("a tiling with {} segments instead of {}", t.len(), 3 * k + 1)));
    }
    Ok(BigUint::from(all.len()))
}

/// The `α_ℓ` entering the moment polynomial.
#[derive(Clone, Debug, PartialEq)]
pub enum Alphas {
    /// Keep `α₂, α₃, …` as the indeterminates `alpha2, alpha3, …`.
    Symbolic,
    /// `[α₂, α₃, …]`, at least `k` of them.
    Exact(Vec<BigRational>),
}

/// `P_{k+1}(x, y)` with `m_{−2k−2}(μ_λ) = P(1/(λ² − 1), 1/λ²)`.
///
/// Kept in the form the diagram sum produces: `x` and `y` are independent
/// indeterminates, although the evaluation point satisfies `x − y = xy`.
/// Compare two of these by evaluating, not by coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentPolynomial {
    k: usize,
    poly: Poly,
}

/// One `(x-exponent, y-exponent, coefficient)` entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple(pub u32, pub u32, pub String);

impl MomentPolynomial {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    /// Substitutes `x = 1/(λ² − 1)`, `y = 1/λ²`; symbolic `α`s stay.
    pub fn eval(&self, lambda: &BigRational) -> Result<Poly> {
        let lam2 = lambda * lambda;
        if lam2 <= int(1) {
            return arg("λ must exceed 1");
        }
        let x = Poly::constant((&lam2 - int(1)).recip());
        let y = Poly::constant(lam2.recip());
        Ok(self.poly.substitute(X, &x).substitute(Y, &y))
    }

    /// As `eval`, for polynomials with numeric `α`.
    pub fn eval_exact(&self, lambda: &BigRational) -> Result<BigRational> {
        self.eval(lambda)?.as_constant().ok_or_else(|| Error::Argument("polynomial still has symbolic α".into()))
    }

    /// The same value as a rational function of `lam2`.
    pub fn to_rational_function(&self) -> RationalFunction {
        let xmax = self.poly.degree_in(X);
        let ymax = self.poly.degree_in(Y);
        let lam2 = Poly::var(LAMBDA2);
        let lam2m1 = &lam2 - &Poly::one();
        let mut numer = Poly::zero();
        for (mono, c) in self.poly.terms() {
            let mut rest = Poly::constant(c.clone());
            for (name, e) in mono.vars() {
                if name != X && name != Y {
                    rest = &rest * &Poly::var(name).pow(e);
                }
            }
            let i = mono.exponent(X);
            let j = mono.exponent(Y);
            numer += &(&rest * &lam2m1.pow(xmax - i)) * &lam2.pow(ymax - j);
        }
        RationalFunction::new(numer, &lam2m1.pow(xmax) * &lam2.pow(ymax))
    }

    /// Coefficients as `(i, j, "p/q")`; needs numeric `α`.
    pub fn triples(&self) -> Result<Vec<Triple>> {
        self.poly
            .terms()
            .map(|(mono, c)| {
                if mono.vars().any(|(name, _)| name != X && name != Y) {
                    return arg("polynomial still has symbolic α");
                }
                Ok(Triple(mono.exponent(X), mono.exponent(Y), rational_to_string(c)))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&self.triples()?).map_err(|e| Error::Parse(e.to_string()))
    }
}

impl fmt::Display for MomentPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.poly)
    }
}

/// `y^{k+1} Σ_D x^{s₁} Π_{ℓ≥2} (α_ℓ y^ℓ)^{s_ℓ}`, summing over `PSD_{k+1}`.
pub fn moment_polynomial(k: usize, alphas: &Alphas) -> Result<MomentPolynomial> {
    let alpha: Vec<Poly> = match alphas {
        Alphas::Symbolic => (2..=k + 1).map(|l| Poly::var(&alpha_symbol(l))).collect(),
        Alphas::Exact(v) => {
            if v.len() < k {
                return arg(format!("need α₂ … α_{} ({k} values), got {}", k + 1, v.len()));
            }
            v[..k].iter().cloned().map(Poly::constant).collect()
        }
    };
    let hist = shape_histogram(k)?;
    let mut poly = Poly::zero();
    for (shape, &count) in hist {
        let s = shape.counts();
        let mut term = Poly::monomial(int(count as i64), X, s[0] as u32);
        let mut ypow = k + 1;
        for (l, &sl) in s.iter().enumerate().skip(1) {
            if sl > 0 {
                term = &term * &alpha[l - 1].pow(sl as u32);
                ypow += (l + 1) * sl;
            }
        }
        poly += &term * &Poly::var(Y).pow(ypow as u32);
    }
    Ok(MomentPolynomial { k, poly })
}

/// `α₂ … α_{k+1}` of a model.
pub fn model_alphas(model: &OperatorModel, k: usize) -> Result<Vec<BigRational>> {
    (2..=k + 1)
        .map(|l| model.alpha(l).ok_or_else(|| Error::Argument(format!("model {} stops before α_{l}", model.name()))))
        .collect()
}

pub fn moment_polynomial_for(model: &OperatorModel, k: usize) -> Result<MomentPolynomial> {
    moment_polynomial(k, &Alphas::Exact(model_alphas(model, k)?))
}

/// `m_{−2k−2}(μ_λ)` from the diagram sum.
pub fn negative_moment_psd(model: &OperatorModel, lambda: &BigRational, k: usize) -> Result<BigRational> {
    if lambda * lambda <= int(1) {
        return arg("λ must exceed 1");
    }
    moment_polynomial_for(model, k)?.eval_exact(lambda)
}

/// Number of valid labelings of `d` with `ε(D, L) ≤ max_eps`.
pub fn count_labelings(d: &PSDiagram, max_eps: usize) -> BigUint {
    let fixed: usize = d.polygons.iter().filter(|p| !p.is_degenerate()).map(|p| p.sides()).sum();
    let chords = d.polygons.iter().filter(|p| p.is_degenerate()).count();
    let base = fixed + 2 * chords;
    if base > max_eps {
        return BigUint::zero();
    }
    // extra label mass e = Σ (L − 1) over chords, with 2e ≤ max_eps − base:
    // Σ_{e} C(e + chords − 1, chords − 1) = C(E + chords, chords)
    let extra = (max_eps - base) / 2;
    if chords == 0 {
        return BigUint::one();
    }
    binomial(extra + chords, chords)
}

fn binomial(n: usize, r: usize) -> BigUint {
    let mut acc = BigUint::one();
    for i in 0..r {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulants::Builtin;
    use crate::nc::fuss_catalan;
    use crate::ring::rat;
    use crate::series::{negative_moment_at, negative_moment_symbolic};
    use std::collections::HashSet;

    fn poly(v: &[usize]) -> Polygon {
        Polygon::new(v.to_vec()).unwrap()
    }

    /// Every alternating-parity subset, and every family of them that is
    /// pairwise non-crossing by direct block realisability: the oracle for
    /// small `k` builds a partition from the diagram and checks it.
    fn brute_force_diagrams(k: usize) -> HashSet<PSDiagram> {
        let n = 2 * (k + 1);
        let polys: Vec<Polygon> = (1u32..1 << n)
            .map(Polygon::from_mask)
            .filter(|p| p.sides() % 2 == 0 && p.vertices.windows(2).all(|w| (w[0] + w[1]) % 2 == 1))
            .collect();
        let mut out = HashSet::new();
        for subset in 0u64..1 << polys.len() {
            let chosen: Vec<Polygon> = (0..polys.len()).filter(|i| subset >> i & 1 == 1).map(|i| polys[i].clone()).collect();
            // realise each polygon as one block on a word with one letter per
            // (polygon, vertex) and test the result for crossings directly
            let labels = vec![1; chosen.len()];
            let d = PSDiagram { k, polygons: { let mut c = chosen.clone(); c.sort(); c } };
            if let Ok(lp) = LabeledPSD::new(d.clone(), labels) {
                if let Ok((_, p)) = decompress_unchecked(&lp) {
                    if p.is_noncrossing() {
                        out.insert(d);
                    }
                }
            }
        }
        out
    }

    /// Lays blocks out with every possible ordering at each vertex and keeps
    /// the first non-crossing arrangement; independent of the arc rule.
    fn decompress_unchecked(lp: &LabeledPSD) -> Result<(AlternationPattern, SetPartition)> {
        let polys = lp.diagram().polygons();
        let n = lp.diagram().num_vertices();
        let degrees = lp.degrees();
        let at: Vec<Vec<usize>> = (0..n).map(|v| (0..polys.len()).filter(|&i| polys[i].contains(v)).collect()).collect();
        let mut offset = vec![1; n + 1];
        for v in 0..n {
            offset[v + 1] = offset[v] + degrees[v];
        }
        let total = offset[n] - 1;
        let mut orders: Vec<Vec<usize>> = at.clone();
        fn permute(v: usize, orders: &mut Vec<Vec<usize>>, polys: &[Polygon], offset: &[usize], total: usize) -> Option<SetPartition> {
            if v == orders.len() {
                let mut blocks = vec![Vec::new(); polys.len()];
                for (u, ord) in orders.iter().enumerate() {
                    for (slot, &i) in ord.iter().enumerate() {
                        blocks[i].push(offset[u] + slot);
                    }
                }
                let p = SetPartition::new(total, blocks).ok()?;
                return p.is_noncrossing().then_some(p);
            }
            let len = orders[v].len();
            let mut c = vec![0; len];
            if let Some(p) = permute(v + 1, orders, polys, offset, total) {
                return Some(p);
            }
            let mut i = 0;
            while i < len {
                if c[i] < i {
                    if i % 2 == 0 { orders[v].swap(0, i) } else { orders[v].swap(c[i], i) }
                    if let Some(p) = permute(v + 1, orders, polys, offset, total) {
                        return Some(p);
                    }
                    c[i] += 1;
                    i = 0;
                } else {
                    c[i] = 0;
                    i += 1;
                }
            }
            None
        }
        let p = permute(0, &mut orders, polys, &offset, total).ok_or_else(|| Error::Argument("crossing".into()))?;
        Ok((AlternationPattern::new(degrees), p))
    }

    #[test]
    fn polygon_validation_and_display() {
        assert!(Polygon::new(vec![0, 2]).is_err());
        assert!(Polygon::new(vec![0, 1, 2]).is_err());
        assert!(Polygon::new(vec![1, 0]).is_err());
        assert_eq!(poly(&[0, 1, 2, 5]).to_string(), "[(1,1) (1,*) (2,1) (3,*)]");
        // a chord through a hexagon crosses it; a side does not
        let hex = poly(&[0, 1, 2, 3, 4, 5]);
        assert!(!hex.compatible(&poly(&[0, 3]), 6));
        assert!(hex.compatible(&poly(&[0, 5]), 6));
        assert!(!poly(&[0, 3]).compatible(&poly(&[1, 4]), 6));
        assert!(poly(&[0, 1, 2, 3]).compatible(&poly(&[0, 3, 4, 5]), 6));
    }

    #[test]
    fn small_diagram_counts() {
        assert_eq!(enumerate_psd(0).unwrap().count(), 2);
        assert_eq!(enumerate_psd(1).unwrap().count(), 32);
        assert!(matches!(enumerate_psd(5).map(|_| ()), Err(Error::Resource(_))));
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for k in 0..=1 {
            let listed: Vec<PSDiagram> = enumerate_psd(k).unwrap().collect();
            let set: HashSet<PSDiagram> = listed.iter().cloned().collect();
            assert_eq!(set.len(), listed.len(), "duplicates at k = {k}");
            assert_eq!(set, brute_force_diagrams(k), "k = {k}");
            for d in &listed {
                assert!(PSDiagram::new(k, d.polygons().to_vec()).is_ok());
            }
        }
    }

    #[test]
    fn histogram_totals_match_iteration() {
        for k in 0..=3 {
            let total: u64 = shape_histogram(k).unwrap().values().sum();
            assert_eq!(total as usize, enumerate_psd(k).unwrap().count());
        }
    }

    #[test]
    fn compress_examples() {
        let pat = AlternationPattern::new(vec![1, 1]);
        let lp = compress(&pat, &SetPartition::new(2, vec![vec![1, 2]]).unwrap()).unwrap();
        assert_eq!(lp.diagram().polygons(), &[poly(&[0, 1])]);
        assert_eq!(lp.labels(), &[1]);
        let nested = SetPartition::new(6, vec![vec![1, 6], vec![2, 5], vec![3, 4]]).unwrap();
        let lp = compress(&AlternationPattern::new(vec![3, 3]), &nested).unwrap();
        assert_eq!(lp.labels(), &[3]);
        assert_eq!(lp.epsilon(), 6);
        let (pat2, p2) = decompress(&lp).unwrap();
        assert_eq!(pat2.runs(), &[3, 3]);
        assert_eq!(p2, nested);
        let crossing = SetPartition::new(4, vec![vec![1, 3], vec![2, 4]]).unwrap();
        assert!(compress(&AlternationPattern::new(vec![1, 1, 1, 1]), &crossing).is_err());
        let same_letter = SetPartition::new(4, vec![vec![1, 2], vec![3, 4]]).unwrap();
        assert!(compress(&AlternationPattern::new(vec![2, 2]), &same_letter).is_err());
    }

    #[test]
    fn mixed_pattern_round_trip() {
        for runs in [vec![2, 3, 4, 3], vec![3, 2, 1, 2, 2, 2], vec![1, 0, 2, 3, 2, 2]] {
            let pat = AlternationPattern::new(runs);
            let parts = enumerate_alternating(&pat);
            assert!(!parts.is_empty());
            let mut seen = HashSet::new();
            for p in &parts {
                let lp = compress(&pat, p).unwrap();
                assert_eq!(lp.degrees(), pat.runs());
                assert!(seen.insert(lp.clone()));
                assert_eq!(decompress(&lp).unwrap(), (pat.clone(), p.clone()));
            }
        }
        // a member with a 4-block, a chord of label 2 and two single chords
        let pat = AlternationPattern::new(vec![2, 3, 4, 3]);
        let p = SetPartition::new(12, vec![vec![1, 12], vec![2, 3, 8, 11], vec![4, 7], vec![5, 6], vec![9, 10]]).unwrap();
        let lp = compress(&pat, &p).unwrap();
        assert_eq!(lp.label_of(&poly(&[0, 1, 2, 3])), 1);
        assert_eq!(lp.label_of(&poly(&[0, 3])), 1);
        assert_eq!(lp.label_of(&poly(&[1, 2])), 2);
        assert_eq!(lp.label_of(&poly(&[2, 3])), 1);
        assert_eq!(lp.profile(), Profile::new(vec![4, 1]));
    }

    #[test]
    fn decompress_rejects_invalid_labels() {
        let d = PSDiagram::new(1, vec![poly(&[0, 1, 2, 3])]).unwrap();
        assert!(LabeledPSD::new(d.clone(), vec![2]).is_err());
        assert!(LabeledPSD::new(d, vec![0]).is_err());
        let single = LabeledPSD::new(PSDiagram::new(0, vec![poly(&[0, 1])]).unwrap(), vec![1]).unwrap();
        let (pat, p) = decompress(&single).unwrap();
        assert_eq!(pat.runs(), &[1, 1]);
        assert_eq!(p, SetPartition::new(2, vec![vec![1, 2]]).unwrap());
    }

    #[test]
    fn exhaustive_bijection() {
        let report = verify_bijection(2, 8).unwrap();
        assert!(report.ok(), "{report:?}");
        assert_eq!(report.per_k.len(), 3);
        assert_eq!(balanced_patterns(0, 2).len(), 1);
        assert_eq!(balanced_patterns(1, 2).len(), 9);
    }

    #[test]
    fn profile_counts() {
        for k in 0..=3 {
            let c = fuss_catalan(2, k as u64);
            for t in 0..=k.max(1) + 1 {
                let mut s = vec![0; k + 1];
                s[0] = 3 * k + 1;
                if k == 0 && t > 0 {
                    assert_eq!(profile_count(0, &[1, t]).unwrap(), BigUint::zero());
                    continue;
                }
                if t > k {
                    s.push(t);
                    s[1..].rotate_right(1);
                    s.truncate(k + 1);
                    s[1] = t;
                } else if k > 0 {
                    s[1] = t;
                }
                let want = if t <= k { binomial(k, t) * &c } else { BigUint::zero() };
                assert_eq!(profile_count(k, &s).unwrap(), want, "k = {k}, t = {t}");
            }
            let hist = shape_histogram(k).unwrap();
            for shape in hist.keys() {
                let s = shape.counts();
                assert!(s[0] <= 3 * k + 1);
                if let Some(l) = (3..=k + 1).rev().find(|&l| s[l - 1] > 0) {
                    assert!(s[0] + l - 2 <= 3 * k + 1, "shape {s:?}");
                    assert!(s[0] < 3 * k + 1);
                }
            }
        }
        assert_eq!(profile_count(1, &[4, 0]).unwrap(), BigUint::from(1u32));
        assert_eq!(profile_count(1, &[0, 0, 5]).unwrap(), BigUint::zero());
    }

    #[test]
    fn quadrangulation_counts() {
        let expect = [1u32, 1, 3, 12, 55, 273, 1428];
        for (k, &e) in expect.iter().enumerate() {
            assert_eq!(count_quadrangulations(k).unwrap(), BigUint::from(e));
            assert_eq!(count_quadrangulations(k).unwrap(), fuss_catalan(2, k as u64));
        }
        assert!(count_quadrangulations(7).is_err());
        // each tiling is itself a diagram of chords
        for k in 0..=3 {
            for t in quadrangulations(k).unwrap() {
                let chords = t.iter().map(|&(a, b)| poly(&[a, b])).collect();
                assert!(PSDiagram::new(k, chords).is_ok());
            }
        }
    }

    #[test]
    fn moment_polynomial_small_cases() {
        let p1 = moment_polynomial(0, &Alphas::Symbolic).unwrap();
        assert_eq!(*p1.poly(), &Poly::var(Y) * &(&Poly::one() + &Poly::var(X)));
        let circ = OperatorModel::builtin(Builtin::Circular);
        for l in [rat(3, 2), int(2), rat(7, 3)] {
            let l2 = &l * &l;
            let m2 = negative_moment_psd(&circ, &l, 0).unwrap();
            assert_eq!(m2, (&l2 - int(1)).recip());
            let m4 = negative_moment_psd(&circ, &l, 1).unwrap();
            // (λ⁴ − 1 + v)/(λ² − 1)⁴ with v = 1
            let want = (&l2 * &l2) / (&l2 - int(1)).pow(4);
            assert_eq!(m4, want);
        }
        let p = moment_polynomial(3, &Alphas::Exact(vec![int(0), int(0), int(0)])).unwrap();
        assert!(p.to_json().unwrap().starts_with("[["));
        assert!(moment_polynomial(3, &Alphas::Symbolic).unwrap().triples().is_err());
        assert!(moment_polynomial(2, &Alphas::Exact(vec![int(0)])).is_err());
    }

    #[test]
    fn leading_x_term() {
        // the coefficient of x^{3k+1} is C_k^{(2)} y^{k+1} (1 + α₂ y²)^k
        for k in 0..=3 {
            let p = moment_polynomial(k, &Alphas::Symbolic).unwrap();
            let lead = p.poly().coefficient_of(X, (3 * k + 1) as u32);
            let c = BigRational::from_integer(fuss_catalan(2, k as u64).into());
            let y = Poly::var(Y);
            let inner = &Poly::one() + &(&Poly::var(&alpha_symbol(2)) * &y.pow(2));
            let want = (&y.pow(k as u32 + 1) * &inner.pow(k as u32)).scale(&c);
            assert_eq!(lead, want, "k = {k}");
            assert_eq!(p.poly().degree_in(X), (3 * k + 1) as u32);
        }
    }

    #[test]
    fn agrees_with_lagrange_route_symbolically() {
        for k in 0..=3 {
            let psd = moment_polynomial(k, &Alphas::Symbolic).unwrap().to_rational_function();
            // the series route names κ₄(μ) = v − 1 and κ_{2n}(μ) = kappa{2n}
            let mut series = negative_moment_symbolic(k).unwrap();
            series = series.substitute("v", &(&Poly::var(&alpha_symbol(2)) + &Poly::one()));
            for l in 3..=k + 1 {
                series = series.substitute(&format!("kappa{}", 2 * l), &Poly::var(&alpha_symbol(l)));
            }
            assert_eq!(psd, series, "k = {k}");
        }
    }

    #[test]
    fn agrees_with_lagrange_route_at_rational_points() {
        let models = [OperatorModel::builtin(Builtin::Circular), OperatorModel::builtin(Builtin::Haar), OperatorModel::builtin(Builtin::TwoAtom)];
        for model in &models {
            for k in 0..=3 {
                let poly = moment_polynomial_for(model, k).unwrap();
                for i in 1..=50i64 {
                    let l = int(1) + rat(i, 17);
                    let a = poly.eval_exact(&l).unwrap();
                    let b = negative_moment_at(model, k, &l).unwrap();
                    assert_eq!(a, b, "{} k = {k} λ = {l}", model.name());
                }
            }
        }
        assert!(negative_moment_psd(&models[0], &int(1), 1).is_err());
    }

    #[test]
    fn labeling_counts() {
        let d = PSDiagram::new(0, vec![poly(&[0, 1])]).unwrap();
        assert_eq!(count_labelings(&d, 8), BigUint::from(4u32));
        assert_eq!(count_labelings(&PSDiagram::empty(0), 0), BigUint::one());
        let sq = PSDiagram::new(1, vec![poly(&[0, 1, 2, 3]), poly(&[0, 1])]).unwrap();
        assert_eq!(count_labelings(&sq, 8), BigUint::from(2u32));
    }
}
