//! The binary perturbation space spanned by a target and a baseline vector.
//!
//! Every input the black box ever sees is built coordinate-wise from either
//! the target or the baseline value, so an input is fully described by a
//! bit mask ([`Context`]). Feature indices are zero-based throughout the
//! library.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the per-feature step `h_i` in the mixed difference is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HConvention {
    /// `h_i = 1` for every feature.
    #[default]
    Unit,
    /// `h_i = |target_i - baseline_i|`.
    Eq4,
}

impl HConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            HConvention::Unit => "unit",
            HConvention::Eq4 => "eq4",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpace {
    target: Vec<f64>,
    baseline: Vec<f64>,
    step: Vec<f64>,
    inert: Vec<bool>,
}

impl PerturbationSpace {
    /// Builds a space with steps chosen by `convention`.
    pub fn new(target: Vec<f64>, baseline: Vec<f64>, convention: HConvention) -> Result<Self> {
        let step = match convention {
            HConvention::Unit => vec![1.0; target.len()],
            HConvention::Eq4 => target
                .iter()
                .zip(&baseline)
                .map(|(t, b)| (t - b).abs())
                .collect(),
        };
        Self::with_steps(target, baseline, step)
    }

    pub fn with_steps(target: Vec<f64>, baseline: Vec<f64>, step: Vec<f64>) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::Parameter("a space needs at least one feature".into()));
        }
        if baseline.len() != target.len() {
            return Err(Error::Dimension {
                expected: target.len(),
                actual: baseline.len(),
            });
        }
        if step.len() != target.len() {
            return Err(Error::Dimension {
                expected: target.len(),
                actual: step.len(),
            });
        }
        for (idx, v) in target.iter().chain(&baseline).chain(&step).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(idx % target.len()));
            }
        }
        let inert: Vec<bool> = target.iter().zip(&baseline).map(|(t, b)| t == b).collect();
        for (index, (&s, &is_inert)) in step.iter().zip(&inert).enumerate() {
            if !is_inert && s <= 0.0 {
                return Err(Error::InvalidStep { index, step: s });
            }
        }
        Ok(Self {
            target,
            baseline,
            step,
            inert,
        })
    }

    pub fn p(&self) -> usize {
        self.target.len()
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn step(&self, i: usize) -> f64 {
        self.step[i]
    }

    pub fn steps(&self) -> &[f64] {
        &self.step
    }

    pub fn is_inert(&self, i: usize) -> bool {
        self.inert[i]
    }

    pub fn inert_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.inert.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i)
    }

    /// Realizes a context as a point of the space.
    pub fn realize(&self, ctx: &Context) -> Result<Vec<f64>> {
        self.check_context(ctx)?;
        Ok((0..self.p())
            .map(|i| {
                if ctx.get(i) {
                    self.target[i]
                } else {
                    self.baseline[i]
                }
            })
            .collect())
    }

    pub fn check_context(&self, ctx: &Context) -> Result<()> {
        if ctx.len() != self.p() {
            return Err(Error::Dimension {
                expected: self.p(),
                actual: ctx.len(),
            });
        }
        Ok(())
    }

    pub fn check_set(&self, set: &FeatureSet) -> Result<()> {
        set.check(self.p())
    }
}

/// A point of the binary cube: bit `i` set means feature `i` takes its
/// target value, clear means its baseline value.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Context {
    len: usize,
    words: Vec<u64>,
}

impl Context {
    pub fn baseline(p: usize) -> Self {
        Self {
            len: p,
            words: vec![0; p.div_ceil(64)],
        }
    }

    pub fn target(p: usize) -> Self {
        let mut ctx = Self::baseline(p);
        for i in 0..p {
            ctx.set(i, true);
        }
        ctx
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut ctx = Self::baseline(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            ctx.set(i, b);
        }
        ctx
    }

    /// Context with exactly the features of `set` at target.
    pub fn from_set(p: usize, set: &FeatureSet) -> Result<Self> {
        Context::baseline(p).with_override(set, true)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, on: bool) {
        assert!(i < self.len, "bit {i} out of range for context of length {}", self.len);
        let bit = 1u64 << (i % 64);
        if on {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Copy of `self` with every bit in `set` forced to `to_target`.
    pub fn with_override(&self, set: &FeatureSet, to_target: bool) -> Result<Self> {
        set.check(self.len)?;
        let mut out = self.clone();
        for &i in set.indices() {
            out.set(i, to_target);
        }
        Ok(out)
    }

    pub(crate) fn with_bits(&self, assignments: &[(usize, bool)]) -> Self {
        let mut out = self.clone();
        for &(i, on) in assignments {
            out.set(i, on);
        }
        out
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Context({self})")
    }
}

/// Free-function form of [`Context::with_override`].
pub fn override_context(ctx: &Context, set: &FeatureSet, to_target: bool) -> Result<Context> {
    ctx.with_override(set, to_target)
}

/// A non-empty, sorted, duplicate-free set of feature indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FeatureSet(Vec<usize>);

impl FeatureSet {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        if v.is_empty() {
            return Err(Error::EmptySet);
        }
        v.sort_unstable();
        v.dedup();
        Ok(Self(v))
    }

    pub fn singleton(i: usize) -> Self {
        Self(vec![i])
    }

    pub fn pair(i: usize, j: usize) -> Result<Self> {
        if i == j {
            return Err(Error::DegeneratePair(i));
        }
        Ok(Self(if i < j { vec![i, j] } else { vec![j, i] }))
    }

    /// `lo..hi` as a set.
    pub fn range(lo: usize, hi: usize) -> Result<Self> {
        Self::new(lo..hi)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> usize {
        self.0[0]
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn check(&self, p: usize) -> Result<()> {
        match self.0.last() {
            Some(&max) if max >= p => Err(Error::IndexOutOfRange { index: max, p }),
            _ => Ok(()),
        }
    }
}

impl TryFrom<Vec<usize>> for FeatureSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        FeatureSet::new(v)
    }
}

impl From<FeatureSet> for Vec<usize> {
    fn from(s: FeatureSet) -> Self {
        s.0
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
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
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Merges sets that share an index until the result is pairwise disjoint.
///
/// Output sets are sorted by their smallest index.
pub fn merge_overlapping(sets: &[FeatureSet]) -> Vec<FeatureSet> {
    let mut universe: Vec<usize> = sets.iter().flat_map(|s| s.indices().iter().copied()).collect();
    universe.sort_unstable();
    universe.dedup();
    let slot = |i: usize| universe.binary_search(&i).expect("index drawn from universe");

    let mut dsu = DisjointSets::new(universe.len());
    for set in sets {
        let first = slot(set.min());
        for &i in &set.indices()[1..] {
            dsu.union(first, slot(i));
        }
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of_root = vec![usize::MAX; universe.len()];
    // universe is ascending, so groups are created in order of their minimum
    for (pos, &feature) in universe.iter().enumerate() {
        let root = dsu.find(pos);
        if group_of_root[root] == usize::MAX {
            group_of_root[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[group_of_root[root]].push(feature);
    }
    groups.into_iter().map(FeatureSet).collect()
}
