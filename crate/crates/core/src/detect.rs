//! Pairwise interaction detection from discrete mixed differences.
//!
//! For a pair `(i, j)` and a context, the four corners override the context
//! at `i` and `j` with every target/baseline combination; the strength is
//! the squared, step-scaled second difference across those corners. It is
//! zero exactly when the four corner outputs lie on a plane, i.e. when the
//! function is additive in `i` and `j` at that context.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blackbox::BlackBox;
use crate::error::{Error, Result};
use crate::metrics::ranking_auc;
use crate::space::Context;

/// Strengths at or below this are treated as zero when ranking and filtering.
pub const NOISE_FLOOR: f64 = 1e-12;

pub const DEFAULT_FULL_CAP: usize = 16;

/// Which contexts the per-pair strengths are averaged over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextRegime {
    /// All-target and all-baseline contexts.
    ArchDetect,
    TargetOnly,
    BaselineOnly,
    /// `n` contexts drawn uniformly from the cube.
    Random { n: usize, seed: u64 },
    /// Exact mean over every context of the other `p - 2` features.
    FullExpectation,
}

impl fmt::Display for ContextRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextRegime::ArchDetect => f.write_str("archdetect"),
            ContextRegime::TargetOnly => f.write_str("target-only"),
            ContextRegime::BaselineOnly => f.write_str("baseline-only"),
            ContextRegime::Random { n, .. } => write!(f, "random:{n}"),
            ContextRegime::FullExpectation => f.write_str("full"),
        }
    }
}

impl FromStr for ContextRegime {
    type Err = Error;

    /// Parses `archdetect`, `target-only`, `baseline-only`, `full` or
    /// `random:N`; random contexts get seed 0 until [`with_seed`](Self::with_seed).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "archdetect" => Ok(Self::ArchDetect),
            "target-only" | "target_only" => Ok(Self::TargetOnly),
            "baseline-only" | "baseline_only" => Ok(Self::BaselineOnly),
            "full" | "full-expectation" => Ok(Self::FullExpectation),
            _ => {
                let n = s
                    .strip_prefix("random:")
                    .and_then(|n| n.parse::<usize>().ok())
                    .ok_or_else(|| Error::Parameter(format!("unknown context regime `{s}`")))?;
                if n == 0 {
                    return Err(Error::Parameter("random:N needs N >= 1".into()));
                }
                Ok(Self::Random { n, seed: 0 })
            }
        }
    }
}

impl ContextRegime {
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            ContextRegime::Random { n, .. } => ContextRegime::Random { n, seed },
            other => other,
        }
    }

    /// Labelled contexts for every regime except the full expectation.
    pub fn contexts(&self, p: usize) -> Vec<(String, Context)> {
        match *self {
            ContextRegime::ArchDetect => vec![
                ("target".into(), Context::target(p)),
                ("baseline".into(), Context::baseline(p)),
            ],
            ContextRegime::TargetOnly => vec![("target".into(), Context::target(p))],
            ContextRegime::BaselineOnly => vec![("baseline".into(), Context::baseline(p))],
            ContextRegime::Random { n, seed } => random_contexts(p, n, seed)
                .into_iter()
                .enumerate()
                .map(|(k, c)| (format!("random{}", k + 1), c))
                .collect(),
            ContextRegime::FullExpectation => Vec::new(),
        }
    }
}

/// `n` contexts with independent fair bits, reproducible from `seed`.
pub fn random_contexts(p: usize, n: usize, seed: u64) -> Vec<Context> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let bits: Vec<bool> = (0..p).map(|_| rng.gen_bool(0.5)).collect();
            Context::from_bits(&bits)
        })
        .collect()
}

/// How many pairs to keep from a ranking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    TopK(usize),
    /// Pairs whose strength exceeds the threshold (and the noise floor).
    Threshold(f64),
}

impl Default for Selection {
    fn default() -> Self {
        Selection::Threshold(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub contexts: ContextRegime,
    pub selection: Selection,
    /// Largest `p` accepted by [`ContextRegime::FullExpectation`].
    pub full_cap: usize,
    /// Worker threads for the pair loop; 0 uses the global pool.
    pub workers: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            contexts: ContextRegime::ArchDetect,
            selection: Selection::default(),
            full_cap: DEFAULT_FULL_CAP,
            workers: 0,
        }
    }
}

impl DetectorConfig {
    pub fn with_contexts(contexts: ContextRegime) -> Self {
        Self {
            contexts,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStrength {
    pub i: usize,
    pub j: usize,
    /// Mean of the per-context strengths.
    pub strength: f64,
    pub per_context: Vec<(String, f64)>,
}

impl PairStrength {
    pub fn context_value(&self, label: &str) -> Option<f64> {
        self.per_context
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| *v)
    }
}

fn effective(strength: f64) -> f64 {
    if strength <= NOISE_FLOOR {
        0.0
    } else {
        strength
    }
}

/// Strength descending (noise collapsed to zero), then `(i, j)` ascending.
fn rank_order(a: &PairStrength, b: &PairStrength) -> Ordering {
    effective(b.strength)
        .total_cmp(&effective(a.strength))
        .then_with(|| (a.i, a.j).cmp(&(b.i, b.j)))
}

/// All pairs of a space ranked by interaction strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRanking {
    pub p: usize,
    pub regime: ContextRegime,
    pub pairs: Vec<PairStrength>,
}

impl InteractionRanking {
    pub fn from_pairs(p: usize, regime: ContextRegime, mut pairs: Vec<PairStrength>) -> Self {
        pairs.sort_by(rank_order);
        Self { p, regime, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn strength(&self, i: usize, j: usize) -> Option<f64> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.pairs
            .iter()
            .find(|s| s.i == i && s.j == j)
            .map(|s| s.strength)
    }

    /// The first `k` pairs in rank order, whatever their strength.
    pub fn top_k(&self, k: usize) -> &[PairStrength] {
        &self.pairs[..k.min(self.pairs.len())]
    }

    /// Pairs in rank order whose strength is above the noise floor and `tau`.
    pub fn above(&self, tau: f64) -> &[PairStrength] {
        let n = self
            .pairs
            .iter()
            .take_while(|s| effective(s.strength) > tau.max(0.0))
            .count();
        &self.pairs[..n]
    }

    /// Top-`k` restricted to pairs with nonzero strength.
    pub fn top_k_nonzero(&self, k: usize) -> &[PairStrength] {
        let nonzero = self.above(0.0);
        &nonzero[..k.min(nonzero.len())]
    }

    pub fn select(&self, selection: Selection) -> &[PairStrength] {
        match selection {
            Selection::TopK(k) => self.top_k(k),
            Selection::Threshold(tau) => self.above(tau),
        }
    }

    /// Pair order as `(i, j)` tuples.
    pub fn order(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|s| (s.i, s.j)).collect()
    }

    /// ROC area of the strengths against a set of positive pairs.
    pub fn auc(&self, positives: &BTreeSet<(usize, usize)>) -> Option<f64> {
        let scored: Vec<(f64, bool)> = self
            .pairs
            .iter()
            .map(|s| (effective(s.strength), positives.contains(&(s.i, s.j))))
            .collect();
        ranking_auc(&scored)
    }
}

fn check_pair(bb: &BlackBox, i: usize, j: usize) -> Result<()> {
    let p = bb.p();
    for idx in [i, j] {
        if idx >= p {
            return Err(Error::IndexOutOfRange { index: idx, p });
        }
    }
    if i == j {
        return Err(Error::DegeneratePair(i));
    }
    for idx in [i, j] {
        if bb.space().is_inert(idx) {
            return Err(Error::InertFeature(idx));
        }
    }
    Ok(())
}

/// Corners `(target,target)`, `(baseline,target)`, `(target,baseline)`,
/// `(baseline,baseline)` at features `(i, j)` over `ctx`.
pub fn corners(ctx: &Context, i: usize, j: usize) -> [Context; 4] {
    [
        ctx.with_bits(&[(i, true), (j, true)]),
        ctx.with_bits(&[(i, false), (j, true)]),
        ctx.with_bits(&[(i, true), (j, false)]),
        ctx.with_bits(&[(i, false), (j, false)]),
    ]
}

/// Squared, step-scaled second difference from the four corner outputs.
///
/// Written as `(a + d) - (b + c)` so that swapping `i` and `j` (which swaps
/// `b` and `c`) gives a bit-identical result.
pub fn omega_from_corners(values: [f64; 4], h_i: f64, h_j: f64) -> f64 {
    let [a, b, c, d] = values;
    let mixed = ((a + d) - (b + c)) / (h_i * h_j);
    mixed * mixed
}

/// Interaction strength of `(i, j)` at one context; bits `i` and `j` of
/// `ctx` are ignored.
pub fn omega_pair(bb: &BlackBox, i: usize, j: usize, ctx: &Context) -> Result<f64> {
    check_pair(bb, i, j)?;
    bb.space().check_context(ctx)?;
    let v = bb.eval_batch(&corners(ctx, i, j))?;
    let space = bb.space();
    Ok(omega_from_corners(
        [v[0], v[1], v[2], v[3]],
        space.step(i),
        space.step(j),
    ))
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(job))
}

fn all_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
        .collect()
}

/// Scores every pair of the space under `cfg.contexts`.
pub fn detect_pairs(bb: &BlackBox, cfg: &DetectorConfig) -> Result<InteractionRanking> {
    let p = bb.p();
    if p < 2 {
        return Err(Error::Parameter("pair detection needs p >= 2".into()));
    }
    if cfg.contexts == ContextRegime::FullExpectation {
        return detect_pairs_full(bb, cfg);
    }
    let contexts = cfg.contexts.contexts(p);
    let space = bb.space();
    let pairs = all_pairs(p);
    let active: Vec<(usize, usize)> = pairs
        .iter()
        .copied()
        .filter(|&(i, j)| !space.is_inert(i) && !space.is_inert(j))
        .collect();

    // one deduplicated batch for every corner, then cache hits only
    let mut seen = HashSet::new();
    let mut needed = Vec::new();
    for (_, ctx) in &contexts {
        for &(i, j) in &active {
            for c in corners(ctx, i, j) {
                if seen.insert(c.clone()) {
                    needed.push(c);
                }
            }
        }
    }
    bb.eval_batch(&needed)?;

    let scored: Vec<Result<PairStrength>> = with_workers(cfg.workers, || {
        pairs
            .par_iter()
            .map(|&(i, j)| {
                let inert = space.is_inert(i) || space.is_inert(j);
                let per_context = contexts
                    .iter()
                    .map(|(label, ctx)| {
                        let w = if inert { 0.0 } else { omega_pair(bb, i, j, ctx)? };
                        Ok((label.clone(), w))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let strength =
                    per_context.iter().map(|(_, w)| w).sum::<f64>() / per_context.len() as f64;
                Ok(PairStrength {
                    i,
                    j,
                    strength,
                    per_context,
                })
            })
            .collect()
    })?;
    let scored = scored.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(InteractionRanking::from_pairs(p, cfg.contexts, scored))
}

/// Dense table of `f` over the whole cube, indexed by mask bits.
struct CubeTable {
    values: Vec<f64>,
}

impl CubeTable {
    fn build(bb: &BlackBox, cap: usize) -> Result<Self> {
        let p = bb.p();
        if p > cap {
            return Err(Error::Capacity { p, cap });
        }
        let masks: Vec<Context> = (0..1u64 << p)
            .map(|m| {
                let bits: Vec<bool> = (0..p).map(|i| m >> i & 1 == 1).collect();
                Context::from_bits(&bits)
            })
            .collect();
        Ok(Self {
            values: bb.eval_batch(&masks)?,
        })
    }

    fn expectation(&self, p: usize, i: usize, j: usize, h_i: f64, h_j: f64) -> f64 {
        let (bi, bj) = (1u64 << i, 1u64 << j);
        let mut sum = 0.0;
        let mut count = 0u64;
        for m in 0..1u64 << p {
            if m & (bi | bj) != 0 {
                continue;
            }
            let at = |x: u64| self.values[x as usize];
            sum += omega_from_corners([at(m | bi | bj), at(m | bj), at(m | bi), at(m)], h_i, h_j);
            count += 1;
        }
        sum / count as f64
    }
}

/// Exact mean of the pair strength over all `2^(p-2)` contexts.
pub fn detect_full_expectation(bb: &BlackBox, i: usize, j: usize, cap: usize) -> Result<f64> {
    check_pair(bb, i, j)?;
    let table = CubeTable::build(bb, cap)?;
    let space = bb.space();
    Ok(table.expectation(bb.p(), i, j, space.step(i), space.step(j)))
}

fn detect_pairs_full(bb: &BlackBox, cfg: &DetectorConfig) -> Result<InteractionRanking> {
    let p = bb.p();
    let table = CubeTable::build(bb, cfg.full_cap)?;
    let space = bb.space();
    let scored: Vec<PairStrength> = with_workers(cfg.workers, || {
        all_pairs(p)
            .par_iter()
            .map(|&(i, j)| {
                let strength = if space.is_inert(i) || space.is_inert(j) {
                    0.0
                } else {
                    table.expectation(p, i, j, space.step(i), space.step(j))
                };
                PairStrength {
                    i,
                    j,
                    strength,
                    per_context: vec![("full".into(), strength)],
                }
            })
            .collect()
    })?;
    Ok(InteractionRanking::from_pairs(
        p,
        ContextRegime::FullExpectation,
        scored,
    ))
}

/// Order in which contexts are added for the redundancy experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextSequence {
    /// Target, then baseline, then random contexts.
    Fixed,
    /// Random contexts only.
    Random,
}

impl fmt::Display for ContextSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContextSequence::Fixed => "fixed",
            ContextSequence::Random => "random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapPoint {
    pub n: usize,
    pub overlap_ratio: f64,
}

/// Stability of the top-`k` pairs as contexts are added one at a time.
///
/// Point `n` compares the top-`k` pairs averaged over the first `n`
/// contexts with those over the first `n - 1`. The top-`k` is taken by
/// rank even when fewer than `k` pairs have nonzero strength.
pub fn redundancy_curve(
    bb: &BlackBox,
    sequence: ContextSequence,
    n_max: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<OverlapPoint>> {
    if n_max < 2 {
        return Err(Error::Parameter("the redundancy curve needs N >= 2".into()));
    }
    if k == 0 {
        return Err(Error::Parameter("the redundancy curve needs k >= 1".into()));
    }
    let p = bb.p();
    if p < 2 {
        return Err(Error::Parameter("pair detection needs p >= 2".into()));
    }
    let contexts: Vec<Context> = match sequence {
        ContextSequence::Fixed => {
            let mut c = vec![Context::target(p), Context::baseline(p)];
            c.extend(random_contexts(p, n_max.saturating_sub(2), seed));
            c.truncate(n_max);
            c
        }
        ContextSequence::Random => random_contexts(p, n_max, seed),
    };

    let pairs = all_pairs(p);
    let space = bb.space();
    let mut sums = vec![0.0; pairs.len()];
    let mut previous: Option<HashSet<(usize, usize)>> = None;
    let mut curve = Vec::with_capacity(n_max - 1);
    for (step, ctx) in contexts.iter().enumerate() {
        let needed: Vec<Context> = pairs
            .iter()
            .filter(|&&(i, j)| !space.is_inert(i) && !space.is_inert(j))
            .flat_map(|&(i, j)| corners(ctx, i, j))
            .collect();
        bb.eval_batch(&needed)?;
        for (sum, &(i, j)) in sums.iter_mut().zip(&pairs) {
            if !space.is_inert(i) && !space.is_inert(j) {
                *sum += omega_pair(bb, i, j, ctx)?;
            }
        }
        let n = step + 1;
        let ranked = InteractionRanking::from_pairs(
            p,
            ContextRegime::Random { n, seed },
            pairs
                .iter()
                .zip(&sums)
                .map(|(&(i, j), &s)| PairStrength {
                    i,
                    j,
                    strength: s / n as f64,
                    per_context: Vec::new(),
                })
                .collect(),
        );
        let top: HashSet<(usize, usize)> = ranked.top_k(k).iter().map(|s| (s.i, s.j)).collect();
        if let Some(prev) = &previous {
            let shared = top.intersection(prev).count();
            curve.push(OverlapPoint {
                n,
                overlap_ratio: shared as f64 / k as f64,
            });
        }
        previous = Some(top);
    }
    Ok(curve)
}
