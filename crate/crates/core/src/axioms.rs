//! Executable checks of the attribution axioms on randomized instances.
//!
//! Every check draws seeded generalized additive instances, computes the
//! attribution through a [`BlackBox`], and records the largest violation of
//! the property it asserts. Violations are data, not errors. Each check can
//! be rerun with a fault injected into the attribution to confirm it is not
//! vacuous.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attribute::{attribute, island_sets, Method};
use crate::blackbox::BlackBox;
use crate::bridge::{bridge_open, BridgeCommand};
use crate::detect::{detect_pairs, DetectorConfig};
use crate::error::Result;
use crate::expr::Expr;
use crate::space::{FeatureSet, HConvention, PerturbationSpace};
use crate::synth::{random_gam, random_gam_on, random_multilinear, random_vectors, GamInstance};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Relative violations are measured against `max(|reference|, ABS_FLOOR / tolerance)`,
/// so small references fall back to an absolute bound of 1e-12.
pub const ABS_FLOOR: f64 = 1e-12;
pub const DEFAULT_FAULT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiomId {
    Completeness,
    SetAttribution,
    SensitivityA,
    SensitivityB,
    ImplementationInvariance,
    Linearity,
    SymmetryPreserving,
    ReluCounterexample,
}

impl AxiomId {
    pub const ALL: [AxiomId; 8] = [
        AxiomId::Completeness,
        AxiomId::SetAttribution,
        AxiomId::SensitivityA,
        AxiomId::SensitivityB,
        AxiomId::ImplementationInvariance,
        AxiomId::Linearity,
        AxiomId::SymmetryPreserving,
        AxiomId::ReluCounterexample,
    ];
}

impl fmt::Display for AxiomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("serializable");
        f.write_str(s.as_str().expect("unit variant"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub axiom: AxiomId,
    pub trials: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub fault_injected: bool,
}

/// Where the implementation-invariance check gets its second,
/// functionally equivalent model.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceHost {
    /// The instance rewritten in the expression language and evaluated by
    /// the expression interpreter.
    Expression,
    /// A bridged host started as `command --gam SEED:P:SETS`.
    Bridge(BridgeCommand),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomConfig {
    pub seed: u64,
    pub trials: usize,
    pub tolerance: f64,
    /// Offset added to every attribution (scaled per set) when set.
    pub fault: Option<f64>,
    pub reference: ReferenceHost,
}

impl AxiomConfig {
    pub fn new(seed: u64, trials: usize) -> Self {
        Self {
            seed,
            trials,
            tolerance: DEFAULT_TOLERANCE,
            fault: None,
            reference: ReferenceHost::Expression,
        }
    }

    pub fn with_fault(mut self, magnitude: f64) -> Self {
        self.fault = Some(magnitude);
        self
    }

    pub fn with_reference(mut self, reference: ReferenceHost) -> Self {
        self.reference = reference;
        self
    }
}

/// Attribution as seen by the checks, optionally corrupted.
#[derive(Debug, Clone, Copy)]
struct Attributor {
    fault: Option<f64>,
}

impl Attributor {
    fn phi(&self, bb: &BlackBox, set: &FeatureSet, method: Method) -> Result<f64> {
        let clean = attribute(bb, set, method)?;
        // offset depends on the set so that symmetric sets are pulled apart
        Ok(match self.fault {
            Some(d) => clean + d * (1.0 + set.min() as f64),
            None => clean,
        })
    }
}

fn violation(got: f64, want: f64, tolerance: f64) -> f64 {
    (got - want).abs() / want.abs().max(ABS_FLOOR / tolerance)
}

fn gam_box(inst: &GamInstance) -> BlackBox {
    let f = inst.clone();
    BlackBox::from_fn(inst.space(HConvention::Unit), move |v| f.eval(v))
}

struct TrialShape {
    gam_seed: u64,
    p: usize,
    num_sets: usize,
}

fn trial_shape(seed: u64, trial: usize) -> TrialShape {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 + 1);
    let p = rng.gen_range(4..=20);
    let num_sets = rng.gen_range(1..=(p / 2).min(5));
    TrialShape {
        gam_seed: rng.gen(),
        p,
        num_sets,
    }
}

fn trial_instance(seed: u64, trial: usize) -> GamInstance {
    let s = trial_shape(seed, trial);
    random_gam(s.gam_seed, s.p, s.num_sets).expect("trial shapes are feasible")
}

fn check_completeness(cfg: &AxiomConfig, att: Attributor, trial: usize) -> Result<f64> {
    let inst = trial_instance(cfg.seed, trial);
    let bb = gam_box(&inst);
    let total = bb.eval_target()? - bb.eval_baseline()?;
    let mut worst: f64 = 0.0;
    for method in [Method::ArchAttribute, Method::Difference] {
        let mut sum = 0.0;
        for set in &inst.sets {
            sum += att.phi(&bb, set, method)?;
        }
        worst = worst.max(violation(sum, total, cfg.tolerance));
    }
    Ok(worst)
}

fn check_set_attribution(cfg: &AxiomConfig, att: Attributor, trial: usize) -> Result<f64> {
    let inst = trial_instance(cfg.seed, trial);
    debug_assert!(inst.has_roots_at_baseline());
    let bb = gam_box(&inst);
    let mut worst: f64 = 0.0;
    for (k, set) in inst.sets.iter().enumerate() {
        let want = inst.subfunctions[k].eval(&inst.target);
        let got = att.phi(&bb, set, Method::ArchAttribute)?;
        worst = worst.max(violation(got, want, cfg.tolerance));
    }
    Ok(worst)
}

fn check_sensitivity_a(cfg: &AxiomConfig, att: Attributor, trial: usize) -> Result<f64> {
    let base = trial_instance(cfg.seed, trial);
    // target equals baseline outside one set whose subfunction moves f
    let k = (0..base.sets.len())
        .max_by(|&a, &b| base.set_value(a).abs().total_cmp(&base.set_value(b).abs()))
        .expect("instances have at least one set");
    let set = &base.sets[k];
    let mut inst = base.clone();
    for i in 0..inst.p() {
        if !set.contains(i) {
            inst.target[i] = inst.baseline[i];
        }
    }
    let bb = gam_box(&inst);
    let total = bb.eval_target()? - bb.eval_baseline()?;
    if total.abs() <= 1e-9 {
        // the construction failed to produce f(target) != f(baseline)
        return Ok(0.0);
    }
    let got = att.phi(&bb, set, Method::ArchAttribute)?;
    if got.abs() <= 1e-9 {
        return Ok(1.0);
    }
    Ok(violation(got, total, cfg.tolerance))
}

fn check_sensitivity_b(cfg: &AxiomConfig, att: Attributor, trial: usize) -> Result<f64> {
    let base = trial_instance(cfg.seed, trial);
    let k = trial % base.sets.len();
    let inst = base.without_set(k);
    let bb = gam_box(&inst);
    Ok(att.phi(&bb, &inst.sets[k], Method::ArchAttribute)?.abs())
}

fn check_linearity(cfg: &AxiomConfig, att: Attributor, trial: usize) -> Result<f64> {
    let f1 = trial_instance(cfg.seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(f1.seed);
    rng.set_stream(7);
    let f2 = random_gam_on(rng.gen(), f1.sets.clone(), f1.target.clone(), f1.baseline.clone());
    let (c1, c2) = loop {
        let c1: f64 = rng.gen_range(-3.0..3.0);
        let c2: f64 = rng.gen_range(-3.0..3.0);
        // keeps the injected fault from cancelling out
        if (c1 + c2 - 1.0).abs() > 0.1 {
            break (c1, c2);
        }
    };
    let space = f1.space(HConvention::Unit);
    let (g1, g2) = (f1.clone(), f2.clone());
    let combined = BlackBox::from_fn(space, move |v| c1 * g1.eval(v) + c2 * g2.eval(v));
    let (bb1, bb2) = (gam_box(&f1), gam_box(&f2));
    let mut worst: f64 = 0.0;
    for set in &f1.sets {
        let want = c1 * att.phi(&bb1, set, Method::ArchAttribute)?
            + c2 * att.phi(&bb2, set, Method::ArchAttribute)?;
        let got = att.phi(&combined, set, Method::ArchAttribute)?;
        worst = worst.max(violation(got, want, cfg.tolerance));
    }
    Ok(worst)
}

/// Two copies of one subfunction on disjoint blocks with mirrored target
/// and baseline values, plus an unrelated subfunction on the remainder.
pub fn symmetric_instance(seed: u64) -> GamInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(2..=4);
    let rest = [0, 2, 3, 4][rng.gen_range(0..4)];
    let p = 2 * m + rest;
    let (half_t, half_b) = random_vectors(&mut rng, m);
    let (rest_t, rest_b) = random_vectors(&mut rng, rest);
    let target: Vec<f64> = half_t.iter().chain(&half_t).chain(&rest_t).copied().collect();
    let baseline: Vec<f64> = half_b.iter().chain(&half_b).chain(&rest_b).copied().collect();

    let a = FeatureSet::range(0, m).expect("m >= 2");
    let b = FeatureSet::range(m, 2 * m).expect("m >= 2");
    let g = random_multilinear(&mut rng, &a).rooted_at(&baseline);
    let mut sets = vec![a, b];
    let mut subfunctions = vec![g.clone(), g.remapped(|i| i + m)];
    if rest > 0 {
        let r = FeatureSet::range(2 * m, p).expect("rest >= 2");
        subfunctions.push(random_multilinear(&mut rng, &r).rooted_at(&baseline));
        sets.push(r);
    }
    GamInstance {
        seed,
        sets,
        subfunctions,
        bias: rng.gen_range(-1.0..1.0),
        target,
        baseline,
    }
}

fn check_symmetry(cfg: &AxiomConfig, att: Attributor, trial: usize) -> Result<f64> {
    let inst = symmetric_instance(trial_shape(cfg.seed, trial).gam_seed);
    let bb = gam_box(&inst);
    let mut worst: f64 = 0.0;
    for method in [Method::ArchAttribute, Method::Difference] {
        let first = att.phi(&bb, &inst.sets[0], method)?;
        let second = att.phi(&bb, &inst.sets[1], method)?;
        worst = worst.max(violation(second, first, cfg.tolerance));
    }
    Ok(worst)
}

fn reference_box(cfg: &AxiomConfig, trial: usize, inst: &GamInstance) -> Result<BlackBox> {
    let space = inst.space(HConvention::Unit);
    match &cfg.reference {
        ReferenceHost::Expression => {
            let expr: Expr = inst.to_expr_string().parse()?;
            Ok(BlackBox::from_fn(space, move |v| expr.eval(v)))
        }
        ReferenceHost::Bridge(command) => {
            let s = trial_shape(cfg.seed, trial);
            let mut command = command.clone();
            command.args.push("--gam".into());
            command.args.push(format!("{}:{}:{}", s.gam_seed, s.p, s.num_sets));
            bridge_open(&command, space)
        }
    }
}

fn check_invariance(cfg: &AxiomConfig, att: Attributor, trial: usize) -> Result<f64> {
    let inst = trial_instance(cfg.seed, trial);
    let local = gam_box(&inst);
    let remote = reference_box(cfg, trial, &inst)?;
    let clean = Attributor { fault: None };

    let detector = DetectorConfig::default();
    let r_local = detect_pairs(&local, &detector)?;
    let r_remote = detect_pairs(&remote, &detector)?;
    if r_local.order() != r_remote.order() {
        return Ok(1.0);
    }
    let scale = r_local.pairs.first().map_or(0.0, |s| s.strength);
    let mut worst: f64 = 0.0;
    for (a, b) in r_local.pairs.iter().zip(&r_remote.pairs) {
        worst = worst.max((a.strength - b.strength).abs() / scale.max(ABS_FLOOR / cfg.tolerance));
    }

    let (islands, _) = island_sets(&local, &r_local, usize::MAX)?;
    for set in inst.sets.iter().chain(&islands) {
        for method in [Method::ArchAttribute, Method::Difference] {
            let want = clean.phi(&local, set, method)?;
            let got = att.phi(&remote, set, method)?;
            worst = worst.max(violation(got, want, cfg.tolerance));
        }
    }
    Ok(worst)
}

/// Pinned instance of `f(v) = relu(v1 + v3 + 1) + relu(v2) + 1`.
pub const RELU_EXPR: &str = "relu(x1 + x3 + 1) + relu(x2) + 1";
pub const RELU_TARGET: [f64; 3] = [2.0, 3.0, 0.5];
/// Roots of both terms: `-1 + -1 + 1 <= 0` and `relu(0) = 0`.
pub const RELU_BASELINE: [f64; 3] = [-1.0, 0.0, -1.0];

/// Four-corner interaction attribution over features 1 and 3, the form
/// used by Shapley-style interaction indices.
pub fn four_corner_relu(target: &[f64], baseline: &[f64]) -> f64 {
    let r = |x1: f64, x3: f64| (x1 + x3 + 1.0).max(0.0);
    r(target[0], target[2]) - r(target[0], baseline[2]) - r(baseline[0], target[2])
        + r(baseline[0], baseline[2])
}

fn check_relu(cfg: &AxiomConfig, att: Attributor) -> Result<f64> {
    let expr: Expr = RELU_EXPR.parse()?;
    let space = PerturbationSpace::new(RELU_TARGET.to_vec(), RELU_BASELINE.to_vec(), HConvention::Unit)?;
    let bb = BlackBox::from_fn(space, move |v| expr.eval(v));
    let first = FeatureSet::new([0, 2])?;
    let second = FeatureSet::singleton(1);
    let want_first = (RELU_TARGET[0] + RELU_TARGET[2] + 1.0).max(0.0);
    let want_second = RELU_TARGET[1].max(0.0);
    let got_first = att.phi(&bb, &first, Method::ArchAttribute)?;
    let got_second = att.phi(&bb, &second, Method::ArchAttribute)?;
    let corner = four_corner_relu(&RELU_TARGET, &RELU_BASELINE);
    if (corner - want_first).abs() <= 1e-9 {
        return Ok(1.0);
    }
    Ok(violation(got_first, want_first, cfg.tolerance)
        .max(violation(got_second, want_second, cfg.tolerance)))
}

fn run_check(cfg: &AxiomConfig, axiom: AxiomId) -> Result<AxiomReport> {
    let att = Attributor { fault: cfg.fault };
    let mut worst: f64 = 0.0;
    let trials = if axiom == AxiomId::ReluCounterexample {
        1
    } else {
        cfg.trials
    };
    for trial in 0..trials {
        let v = match axiom {
            AxiomId::Completeness => check_completeness(cfg, att, trial)?,
            AxiomId::SetAttribution => check_set_attribution(cfg, att, trial)?,
            AxiomId::SensitivityA => check_sensitivity_a(cfg, att, trial)?,
            AxiomId::SensitivityB => check_sensitivity_b(cfg, att, trial)?,
            AxiomId::ImplementationInvariance => check_invariance(cfg, att, trial)?,
            AxiomId::Linearity => check_linearity(cfg, att, trial)?,
            AxiomId::SymmetryPreserving => check_symmetry(cfg, att, trial)?,
            AxiomId::ReluCounterexample => check_relu(cfg, att)?,
        };
        worst = worst.max(v);
    }
    // independence of a set is asserted as an exact zero
    let tolerance = if axiom == AxiomId::SensitivityB {
        0.0
    } else {
        cfg.tolerance
    };
    Ok(AxiomReport {
        axiom,
        trials,
        max_violation: worst,
        tolerance,
        passed: worst <= tolerance,
        fault_injected: cfg.fault.is_some(),
    })
}

/// Runs one check.
pub fn run_axiom(cfg: &AxiomConfig, axiom: AxiomId) -> Result<AxiomReport> {
    run_check(cfg, axiom)
}

/// Runs every check under `cfg`.
pub fn run_axiom_suite_with(cfg: &AxiomConfig) -> Result<Vec<AxiomReport>> {
    AxiomId::ALL.iter().map(|&a| run_check(cfg, a)).collect()
}

/// Every check with default settings and the in-process expression
/// interpreter as the reference implementation.
pub fn run_axiom_suite(seed: u64, trials: usize) -> Result<Vec<AxiomReport>> {
    run_axiom_suite_with(&AxiomConfig::new(seed, trials.max(1)))
}

/// Every check with an off-by-constant fault; each report should fail.
pub fn run_negative_controls(seed: u64, trials: usize) -> Result<Vec<AxiomReport>> {
    run_axiom_suite_with(&AxiomConfig::new(seed, trials.max(1)).with_fault(DEFAULT_FAULT))
}
