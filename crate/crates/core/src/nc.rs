//! Non-crossing partitions, pairings, interval-join connectivity and the
//! alternating partitions that index R-diagonal word moments.
//!
//! All partitions are over the ground set `{1, …, n}` (one-based, as in the
//! combinatorics literature). Enumeration places the block containing the
//! smallest unplaced element first and then fills the gaps it leaves; every
//! gap is an independent interval, which is what makes the recursion
//! non-crossing by construction.

use std::fmt;

use num_bigint::BigUint;
use num_integer::binomial;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

/// Largest ground set the collecting enumerators accept by default.
pub const DEFAULT_ENUMERATION_BOUND: usize = 18;

/// A set partition of `{1, …, n}` in canonical form: elements ascending
/// inside each block, blocks ordered by their minima.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SetPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    /// Validates and canonicalizes.
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n + 1];
        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        for b in &blocks {
            if b.is_empty() {
                return arg("empty block");
            }
            for &x in b {
                if x == 0 || x > n {
                    return arg(format!("element {x} outside 1..={n}"));
                }
                if seen[x] {
                    return arg(format!("element {x} appears twice"));
                }
                seen[x] = true;
            }
        }
        if seen.iter().skip(1).any(|s| !s) {
            return arg("blocks do not cover the ground set");
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(SetPartition { n, blocks })
    }

    /// Builds from blocks known to be a partition; only canonicalizes order.
    pub(crate) fn from_raw(n: usize, raw: &[Vec<usize>]) -> Self {
        let mut blocks = raw.to_vec();
        blocks.sort_unstable_by_key(|b| b[0]);
        SetPartition { n, blocks }
    }

    pub fn singletons(n: usize) -> Self {
        SetPartition { n, blocks: (1..=n).map(|i| vec![i]).collect() }
    }

    pub fn full(n: usize) -> Self {
        let blocks = if n == 0 { vec![] } else { vec![(1..=n).collect()] };
        SetPartition { n, blocks }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_noncrossing(&self) -> bool {
        is_noncrossing(self)
    }
}

impl fmt::Display for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            let items: Vec<String> = b.iter().map(|x| x.to_string()).collect();
            write!(f, "{{{}}}", items.join(","))?;
        }
        write!(f, "}}")
    }
}

/// The interval partition `0̂` with consecutive blocks of the given sizes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntervalPartition {
    sizes: Vec<usize>,
}

impl IntervalPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.contains(&0) {
            return arg("interval sizes must be positive");
        }
        Ok(IntervalPartition { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn to_partition(&self) -> SetPartition {
        let mut blocks = Vec::with_capacity(self.sizes.len());
        let mut next = 1;
        for &s in &self.sizes {
            blocks.push((next..next + s).collect());
            next += s;
        }
        SetPartition { n: self.total(), blocks }
    }
}

/// The two letters of an R-diagonal word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Letter {
    A,
    AStar,
}

/// Run lengths `(n₀, m₀, n₁, m₁, …)`: `n`-runs are `a*`, `m`-runs are `a`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AlternationPattern {
    runs: Vec<usize>,
}

impl AlternationPattern {
    pub fn new(runs: Vec<usize>) -> Self {
        AlternationPattern { runs }
    }

    /// Interleaves `n` and `m` into `(n₀, m₀, n₁, m₁, …)`.
    pub fn interleave(n: &[usize], m: &[usize]) -> Result<Self> {
        if n.len() != m.len() {
            return arg("n and m must have equal length");
        }
        Ok(AlternationPattern { runs: n.iter().zip(m).flat_map(|(&a, &b)| [a, b]).collect() })
    }

    /// The pattern of `(a* a)^n`.
    pub fn alternating_power(n: usize) -> Self {
        AlternationPattern { runs: vec![1; 2 * n] }
    }

    pub fn runs(&self) -> &[usize] {
        &self.runs
    }

    pub fn star_total(&self) -> usize {
        self.runs.iter().step_by(2).sum()
    }

    pub fn plain_total(&self) -> usize {
        self.runs.iter().skip(1).step_by(2).sum()
    }

    pub fn is_balanced(&self) -> bool {
        self.star_total() == self.plain_total()
    }

    pub fn word_len(&self) -> usize {
        self.runs.iter().sum()
    }

    pub fn word(&self) -> Vec<Letter> {
        let mut w = Vec::with_capacity(self.word_len());
        for (i, &r) in self.runs.iter().enumerate() {
            let l = if i % 2 == 0 { Letter::AStar } else { Letter::A };
            w.extend(std::iter::repeat_n(l, r));
        }
        w
    }
}

/// Local admissibility rules steering the generic enumerator.
pub(crate) trait BlockRule {
    /// May `next` extend the open block `block`?
    fn admits_next(&self, block: &[usize], next: usize) -> bool;
    /// May `block` be closed as it stands?
    fn admits_block(&self, block: &[usize]) -> bool;
    /// Can the half-open interval `[lo, hi)` be partitioned at all?
    fn gap_feasible(&self, lo: usize, hi: usize) -> bool;
}

pub(crate) struct AnyBlocks;

impl BlockRule for AnyBlocks {
    fn admits_next(&self, _: &[usize], _: usize) -> bool {
        true
    }
    fn admits_block(&self, _: &[usize]) -> bool {
        true
    }
    fn gap_feasible(&self, _: usize, _: usize) -> bool {
        true
    }
}

/// Pairings whose pairs pass `ok(i, j)`.
pub(crate) struct PairRule<F: Fn(usize, usize) -> bool>(pub F);

impl<F: Fn(usize, usize) -> bool> BlockRule for PairRule<F> {
    fn admits_next(&self, block: &[usize], next: usize) -> bool {
        block.len() == 1 && (self.0)(block[0], next)
    }
    fn admits_block(&self, block: &[usize]) -> bool {
        block.len() == 2
    }
    fn gap_feasible(&self, lo: usize, hi: usize) -> bool {
        (hi - lo).is_multiple_of(2)
    }
}

/// Blocks of even size whose letters alternate in position order.
struct AlternatingRule {
    letters: Vec<Letter>,
    // prefix[i] = (#a*) − (#a) among positions 1..i
    prefix: Vec<i64>,
}

impl AlternatingRule {
    fn new(word: Vec<Letter>) -> Self {
        let mut prefix = vec![0i64; word.len() + 1];
        for (i, l) in word.iter().enumerate() {
            prefix[i + 1] = prefix[i] + if *l == Letter::AStar { 1 } else { -1 };
        }
        // one-based access
        let mut letters = vec![Letter::A];
        letters.extend(word);
        AlternatingRule { letters, prefix }
    }
}

impl BlockRule for AlternatingRule {
    fn admits_next(&self, block: &[usize], next: usize) -> bool {
        self.letters[*block.last().unwrap()] != self.letters[next]
    }
    fn admits_block(&self, block: &[usize]) -> bool {
        block.len().is_multiple_of(2)
    }
    fn gap_feasible(&self, lo: usize, hi: usize) -> bool {
        // every alternating block is balanced, so any union of them is too
        self.prefix[hi - 1] == self.prefix[lo - 1]
    }
}

struct Enumerator<'a, R: BlockRule, V: FnMut(&[Vec<usize>])> {
    rule: &'a R,
    pending: Vec<(usize, usize)>,
    blocks: Vec<Vec<usize>>,
    visit: V,
}

impl<R: BlockRule, V: FnMut(&[Vec<usize>])> Enumerator<'_, R, V> {
    fn fill(&mut self) {
        let Some((lo, hi)) = self.pending.pop() else {
            (self.visit)(&self.blocks);
            return;
        };
        if lo == hi {
            self.fill();
        } else if self.rule.gap_feasible(lo, hi) {
            self.blocks.push(vec![lo]);
            self.grow(hi);
            self.blocks.pop();
        }
        self.pending.push((lo, hi));
    }

    fn grow(&mut self, hi: usize) {
        let last = *self.blocks.last().unwrap().last().unwrap();
        if self.rule.admits_block(self.blocks.last().unwrap()) {
            self.pending.push((last + 1, hi));
            self.fill();
            self.pending.pop();
        }
        for next in last + 1..hi {
            if !self.rule.admits_next(self.blocks.last().unwrap(), next) {
                continue;
            }
            if last + 1 < next && !self.rule.gap_feasible(last + 1, next) {
                continue;
            }
            self.pending.push((last + 1, next));
            self.blocks.last_mut().unwrap().push(next);
            self.grow(hi);
            self.blocks.last_mut().unwrap().pop();
            self.pending.pop();
        }
    }
}

/// Streams every non-crossing partition of `{1..n}` admitted by `rule`.
/// Blocks are handed out in creation order, not canonical order.
pub(crate) fn visit_with_rule<R: BlockRule>(n: usize, rule: &R, visit: impl FnMut(&[Vec<usize>])) {
    let mut e = Enumerator { rule, pending: vec![(1, n + 1)], blocks: Vec::new(), visit };
    e.fill();
}

fn check_bound(n: usize, bound: usize) -> Result<()> {
    if n > bound {
        Err(Error::Resource(format!("ground set of size {n} exceeds enumeration bound {bound}")))
    } else {
        Ok(())
    }
}

fn collect_with_rule<R: BlockRule>(n: usize, rule: &R) -> Vec<SetPartition> {
    let mut out = Vec::new();
    visit_with_rule(n, rule, |b| out.push(SetPartition::from_raw(n, b)));
    out.sort_unstable();
    out
}

/// True iff no `a < b < c < d` has `a, c` in one block and `b, d` in another.
pub fn is_noncrossing(p: &SetPartition) -> bool {
    let mut owner = vec![0usize; p.n + 1];
    for (i, b) in p.blocks.iter().enumerate() {
        for &x in b {
            owner[x] = i;
        }
    }
    // Two blocks cross iff some element of one lies strictly between two
    // consecutive elements of the other while the other also has an element
    // outside that gap.
    for (i, b) in p.blocks.iter().enumerate() {
        for w in b.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            for x in lo + 1..hi {
                let j = owner[x];
                if j != i && p.blocks[j].iter().any(|&y| y < lo || y > hi) {
                    return false;
                }
            }
        }
    }
    true
}

/// All of `NC(n)` in canonical order.
pub fn enumerate_nc(n: usize) -> Result<Vec<SetPartition>> {
    enumerate_nc_bounded(n, DEFAULT_ENUMERATION_BOUND)
}

pub fn enumerate_nc_bounded(n: usize, bound: usize) -> Result<Vec<SetPartition>> {
    check_bound(n, bound)?;
    Ok(collect_with_rule(n, &AnyBlocks))
}

/// All non-crossing pairings of `{1..n}`; empty when `n` is odd.
pub fn enumerate_nc_pairings(n: usize) -> Result<Vec<SetPartition>> {
    check_bound(n, DEFAULT_ENUMERATION_BOUND * 2)?;
    if n % 2 == 1 {
        return Ok(Vec::new());
    }
    Ok(collect_with_rule(n, &PairRule(|_, _| true)))
}

/// Whether `π ∨ 0̂ = 1`, i.e. the blocks of `p` link all intervals of `iv`.
pub fn join_connects(p: &SetPartition, iv: &IntervalPartition) -> Result<bool> {
    if p.n != iv.total() {
        return arg(format!("partition of {} points joined with intervals totalling {}", p.n, iv.total()));
    }
    Ok(join_connects_raw(p.n, &p.blocks, iv.sizes()))
}

pub(crate) fn join_connects_raw(n: usize, blocks: &[Vec<usize>], sizes: &[usize]) -> bool {
    if sizes.len() <= 1 {
        return true;
    }
    let mut group = vec![0usize; n + 1];
    let mut pos = 1;
    for (g, &s) in sizes.iter().enumerate() {
        for _ in 0..s {
            group[pos] = g;
            pos += 1;
        }
    }
    let mut uf = UnionFind::new(sizes.len());
    for b in blocks {
        for w in b.windows(2) {
            uf.union(group[w[0]], group[w[1]]);
        }
    }
    uf.components() == 1
}

struct UnionFind {
    parent: Vec<usize>,
    count: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), count: n }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
            self.count -= 1;
        }
    }

    fn components(&self) -> usize {
        self.count
    }
}

/// Streams the alternating non-crossing partitions of a pattern's word.
pub fn visit_alternating(pat: &AlternationPattern, visit: impl FnMut(&[Vec<usize>])) {
    if !pat.is_balanced() {
        return;
    }
    let rule = AlternatingRule::new(pat.word());
    visit_with_rule(pat.word_len(), &rule, visit);
}

/// `NC(n₀, m₀, …)`: non-crossing partitions of the word whose blocks have
/// even size and alternate between `a*` and `a` in position order.
/// The empty pattern yields the single empty partition.
pub fn enumerate_alternating(pat: &AlternationPattern) -> Vec<SetPartition> {
    let n = pat.word_len();
    let mut out = Vec::new();
    visit_alternating(pat, |b| out.push(SetPartition::from_raw(n, b)));
    out.sort_unstable();
    out
}

/// Fuss–Catalan number `C⁽ᵖ⁾ₖ = binom((p+1)k, k) / (pk+1)`.
pub fn fuss_catalan(p: u64, k: u64) -> BigUint {
    if k == 0 {
        return BigUint::one();
    }
    let top = BigUint::from((p + 1) * k);
    binomial(top, BigUint::from(k)) / BigUint::from(p * k + 1)
}

pub fn catalan(n: u64) -> BigUint {
    fuss_catalan(1, n)
}
