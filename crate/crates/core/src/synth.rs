//! Synthetic functions with known interaction structure.
//!
//! F1..F4 are the 40-feature benchmark functions evaluated at the all-ones
//! target against the all-minus-ones baseline. [`random_gam`] builds seeded
//! generalized additive instances whose per-set attributions are known in
//! closed form.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{FeatureSet, HConvention, PerturbationSpace};

pub const BENCH_P: usize = 40;

/// Returns 1 if `v[i] == z[i]` for every key of `z`, else -1.
pub fn wedge(v: &[f64], z: &BTreeMap<usize, f64>) -> f64 {
    if z.iter().all(|(&i, &want)| v[i] == want) {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Term {
    /// `coeff * prod(v[i] for i in vars)`; repeated indices are allowed.
    Monomial { coeff: f64, vars: Vec<usize> },
    /// Conjunction indicator over fixed trigger values.
    Wedge { keys: BTreeMap<usize, f64> },
}

impl Term {
    fn eval(&self, v: &[f64]) -> f64 {
        match self {
            Term::Monomial { coeff, vars } => vars.iter().fold(*coeff, |acc, &i| acc * v[i]),
            Term::Wedge { keys } => wedge(v, keys),
        }
    }

    fn support(&self) -> BTreeSet<usize> {
        match self {
            Term::Monomial { vars, .. } => vars.iter().copied().collect(),
            Term::Wedge { keys } => keys.keys().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SyntheticId {
    F1,
    F2,
    F3,
    F4,
    Custom,
}

impl SyntheticId {
    pub const BENCH: [SyntheticId; 4] = [Self::F1, Self::F2, Self::F3, Self::F4];
}

impl fmt::Display for SyntheticId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SyntheticId::F1 => "F1",
            SyntheticId::F2 => "F2",
            SyntheticId::F3 => "F3",
            SyntheticId::F4 => "F4",
            SyntheticId::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl FromStr for SyntheticId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "F1" => Ok(Self::F1),
            "F2" => Ok(Self::F2),
            "F3" => Ok(Self::F3),
            "F4" => Ok(Self::F4),
            _ => Err(Error::Parameter(format!("unknown synthetic function `{s}`"))),
        }
    }
}

/// A closed-form function given as a sum of terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFunction {
    pub id: SyntheticId,
    pub p: usize,
    pub terms: Vec<Term>,
}

impl SyntheticFunction {
    pub fn custom(p: usize, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if let Some(&max) = t.support().iter().next_back() {
                if max >= p {
                    return Err(Error::IndexOutOfRange { index: max, p });
                }
            }
        }
        Ok(Self {
            id: SyntheticId::Custom,
            p,
            terms,
        })
    }

    /// One of the four 40-feature benchmark functions.
    pub fn bench(id: SyntheticId) -> Self {
        let p = BENCH_P;
        let (target, baseline) = bench_vectors();
        let stars = |r: std::ops::Range<usize>| -> BTreeMap<usize, f64> {
            r.map(|i| (i, target[i])).collect()
        };
        let primes = |r: std::ops::Range<usize>| -> BTreeMap<usize, f64> {
            r.map(|i| (i, baseline[i])).collect()
        };
        let linear = (0..p).map(|k| Term::Monomial {
            coeff: 1.0,
            vars: vec![k],
        });
        let mut terms = Vec::new();
        match id {
            SyntheticId::F1 => {
                // literal double sums, diagonal and both orderings included
                for i in 0..10 {
                    for j in 0..10 {
                        terms.push(Term::Monomial {
                            coeff: 1.0,
                            vars: vec![i, j],
                        });
                    }
                }
                for i in 10..20 {
                    for j in 20..30 {
                        terms.push(Term::Monomial {
                            coeff: 1.0,
                            vars: vec![i, j],
                        });
                    }
                }
            }
            SyntheticId::F2 => {
                terms.push(Term::Wedge { keys: stars(0..20) });
                terms.push(Term::Wedge { keys: stars(10..30) });
            }
            SyntheticId::F3 => {
                terms.push(Term::Wedge { keys: primes(0..20) });
                terms.push(Term::Wedge { keys: stars(10..30) });
            }
            SyntheticId::F4 => {
                let mut keys = stars(0..2);
                keys.extend(primes(2..3));
                terms.push(Term::Wedge { keys });
                terms.push(Term::Wedge { keys: stars(10..30) });
            }
            SyntheticId::Custom => panic!("custom functions have no fixed definition"),
        }
        terms.extend(linear);
        Self { id, p, terms }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.p);
        self.terms.iter().map(|t| t.eval(v)).sum()
    }

    /// Supports of the non-additive terms, deduplicated.
    pub fn ground_truth_sets(&self) -> Vec<FeatureSet> {
        let sets: BTreeSet<FeatureSet> = self
            .terms
            .iter()
            .map(Term::support)
            .filter(|s| s.len() >= 2)
            .map(|s| FeatureSet::new(s).expect("support is non-empty"))
            .collect();
        sets.into_iter().collect()
    }

    /// Every pair contained in some ground-truth set, as `(i, j)` with `i < j`.
    pub fn ground_truth_pairs(&self) -> BTreeSet<(usize, usize)> {
        pairs_within(&self.ground_truth_sets())
    }

    /// The standard perturbation space of the benchmark.
    pub fn space(&self, h: HConvention) -> PerturbationSpace {
        let (target, baseline) = bench_vectors();
        PerturbationSpace::new(target[..self.p].to_vec(), baseline[..self.p].to_vec(), h)
            .expect("benchmark vectors are valid")
    }
}

/// Free-function form of [`SyntheticFunction::eval`].
pub fn eval_synthetic(f: &SyntheticFunction, v: &[f64]) -> f64 {
    f.eval(v)
}

fn bench_vectors() -> (Vec<f64>, Vec<f64>) {
    (vec![1.0; BENCH_P], vec![-1.0; BENCH_P])
}

pub fn pairs_within(sets: &[FeatureSet]) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for s in sets {
        let idx = s.indices();
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                out.insert((i, j));
            }
        }
    }
    out
}

/// Multilinear polynomial over a feature subset plus an offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multilinear {
    pub terms: Vec<(f64, Vec<usize>)>,
    pub offset: f64,
}

impl Multilinear {
    pub fn eval(&self, v: &[f64]) -> f64 {
        let raw: f64 = self
            .terms
            .iter()
            .map(|(c, vars)| vars.iter().fold(*c, |acc, &i| acc * v[i]))
            .sum();
        raw + self.offset
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|(k, v)| (k * c, v.clone())).collect(),
            offset: self.offset * c,
        }
    }

    /// Same polynomial with every variable index passed through `map`.
    pub fn remapped(&self, map: impl Fn(usize) -> usize) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(c, vars)| (*c, vars.iter().map(|&i| map(i)).collect()))
                .collect(),
            offset: self.offset,
        }
    }

    /// Shifts the offset so the polynomial vanishes at `root`.
    pub fn rooted_at(mut self, root: &[f64]) -> Self {
        self.offset = 0.0;
        self.offset = -self.eval(root);
        self
    }
}

/// `f(v) = sum_k g_k(v[I_k]) + bias` over disjoint sets with `g_k(baseline) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamInstance {
    pub seed: u64,
    pub sets: Vec<FeatureSet>,
    pub subfunctions: Vec<Multilinear>,
    pub bias: f64,
    pub target: Vec<f64>,
    pub baseline: Vec<f64>,
}

impl GamInstance {
    pub fn p(&self) -> usize {
        self.target.len()
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.subfunctions.iter().map(|g| g.eval(v)).sum::<f64>() + self.bias
    }

    /// Closed-form attribution of set `k`: `g_k(target) - g_k(baseline)`.
    pub fn set_value(&self, k: usize) -> f64 {
        self.subfunctions[k].eval(&self.target) - self.subfunctions[k].eval(&self.baseline)
    }

    pub fn space(&self, h: HConvention) -> PerturbationSpace {
        PerturbationSpace::new(self.target.clone(), self.baseline.clone(), h)
            .expect("instance vectors are valid")
    }

    /// Copy with subfunction `k` removed, so `f` no longer depends on `sets[k]`.
    pub fn without_set(&self, k: usize) -> Self {
        let mut out = self.clone();
        out.subfunctions[k] = Multilinear {
            terms: Vec::new(),
            offset: 0.0,
        };
        out
    }

    /// The same function written in the expression language of
    /// [`crate::expr`], with one-based variable names.
    pub fn to_expr_string(&self) -> String {
        let num = |x: f64| format!("({x:?})");
        let mut parts = Vec::new();
        for g in &self.subfunctions {
            for (c, vars) in &g.terms {
                let mut t = num(*c);
                for &i in vars {
                    t.push_str(&format!(" * x{}", i + 1));
                }
                parts.push(t);
            }
            parts.push(num(g.offset));
        }
        parts.push(num(self.bias));
        parts.join(" + ")
    }

    /// Whether every subfunction is exactly zero at the baseline.
    pub fn has_roots_at_baseline(&self) -> bool {
        self.subfunctions
            .iter()
            .all(|g| g.eval(&self.baseline) == 0.0)
    }
}

/// Seeded generalized additive instance over `num_sets` disjoint sets that
/// partition all `p` features, each of size at least two.
pub fn random_gam(seed: u64, p: usize, num_sets: usize) -> Result<GamInstance> {
    if num_sets == 0 || num_sets * 2 > p {
        return Err(Error::Parameter(format!(
            "cannot split p={p} into {num_sets} sets of size >= 2"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    let mut sizes = vec![2usize; num_sets];
    for _ in 0..p - 2 * num_sets {
        sizes[rng.gen_range(0..num_sets)] += 1;
    }
    let mut sets = Vec::with_capacity(num_sets);
    let mut start = 0;
    for size in sizes {
        sets.push(FeatureSet::new(order[start..start + size].iter().copied())?);
        start += size;
    }
    sets.sort();

    let (target, baseline) = random_vectors(&mut rng, p);
    Ok(gam_from_rng(&mut rng, seed, sets, target, baseline))
}

/// Instance with fresh subfunctions over a given partition and vectors.
pub fn random_gam_on(
    seed: u64,
    sets: Vec<FeatureSet>,
    target: Vec<f64>,
    baseline: Vec<f64>,
) -> GamInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gam_from_rng(&mut rng, seed, sets, target, baseline)
}

fn gam_from_rng(
    rng: &mut ChaCha8Rng,
    seed: u64,
    sets: Vec<FeatureSet>,
    target: Vec<f64>,
    baseline: Vec<f64>,
) -> GamInstance {
    let subfunctions = sets
        .iter()
        .map(|s| random_multilinear(rng, s).rooted_at(&baseline))
        .collect();
    let bias = rng.gen_range(-1.0..1.0);
    GamInstance {
        seed,
        sets,
        subfunctions,
        bias,
        target,
        baseline,
    }
}

/// Target and baseline values at least 0.25 apart in every coordinate.
pub(crate) fn random_vectors(rng: &mut impl Rng, p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut target = Vec::with_capacity(p);
    let mut baseline = Vec::with_capacity(p);
    for _ in 0..p {
        let t: f64 = rng.gen_range(-2.0..2.0);
        let gap: f64 = rng.gen_range(0.25..2.0);
        let b = if rng.gen_bool(0.5) { t + gap } else { t - gap };
        target.push(t);
        baseline.push(b);
    }
    (target, baseline)
}

/// Linear terms for every feature, a chain of pairwise products that
/// connects the whole set, and one extra higher-order product.
pub(crate) fn random_multilinear(rng: &mut impl Rng, set: &FeatureSet) -> Multilinear {
    let idx = set.indices();
    let mut terms: Vec<(f64, Vec<usize>)> = idx
        .iter()
        .map(|&i| (rng.gen_range(-1.0..1.0), vec![i]))
        .collect();
    let mut chain = idx.to_vec();
    chain.shuffle(rng);
    for w in chain.windows(2) {
        let magnitude: f64 = rng.gen_range(0.5..1.5);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        terms.push((sign * magnitude, vec![w[0], w[1]]));
    }
    if idx.len() >= 3 {
        let k = rng.gen_range(3..=idx.len().min(4));
        let mut vars: Vec<usize> = idx.choose_multiple(rng, k).copied().collect();
        vars.sort_unstable();
        terms.push((rng.gen_range(-1.0..1.0), vars));
    }
    Multilinear { terms, offset: 0.0 }
}
