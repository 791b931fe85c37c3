//! Acceptance criteria, one PASS/FAIL line each. Oracles (benchmark
//! functions, corner strengths, AUC) are written out here independently of
//! the library.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use archipelago::axioms::{run_axiom_suite_with, AxiomConfig, ReferenceHost, DEFAULT_FAULT, RELU_BASELINE, RELU_EXPR, RELU_TARGET};
use archipelago::expr::Expr;
use archipelago::{
    arch_attribute, detect_full_expectation, detect_pairs, redundancy_curve, BlackBox,
    BridgeCommand, ContextRegime, ContextSequence, DetectorConfig, FeatureSet, HConvention,
    PerturbationSpace, SyntheticFunction, SyntheticId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_archipelago");
const P: usize = 40;

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

// ---------------------------------------------------------------- oracles

/// 1 when every listed feature sits at the required value, else -1.
fn all_at(v: &[f64], idx: impl IntoIterator<Item = usize>, want: impl Fn(usize) -> f64) -> f64 {
    if idx.into_iter().all(|i| v[i] == want(i)) {
        1.0
    } else {
        -1.0
    }
}

/// The four benchmark functions with target = +1 and baseline = -1.
fn bench_f(id: SyntheticId, v: &[f64]) -> f64 {
    let star = |_| 1.0;
    let prime = |_| -1.0;
    let linear: f64 = v.iter().sum();
    linear
        + match id {
            SyntheticId::F1 => {
                let mut s = 0.0;
                for i in 0..10 {
                    for j in 0..10 {
                        s += v[i] * v[j];
                    }
                }
                for i in 10..20 {
                    for j in 20..30 {
                        s += v[i] * v[j];
                    }
                }
                s
            }
            SyntheticId::F2 => all_at(v, 0..20, star) + all_at(v, 10..30, star),
            SyntheticId::F3 => all_at(v, 0..20, prime) + all_at(v, 10..30, star),
            SyntheticId::F4 => {
                let first = if v[0] == 1.0 && v[1] == 1.0 && v[2] == -1.0 { 1.0 } else { -1.0 };
                first + all_at(v, 10..30, star)
            }
            SyntheticId::Custom => unreachable!(),
        }
}

fn pairs_in(r: std::ops::Range<usize>) -> BTreeSet<(usize, usize)> {
    r.clone().flat_map(|i| (i + 1..r.end).map(move |j| (i, j))).collect()
}

fn truth(id: SyntheticId) -> BTreeSet<(usize, usize)> {
    match id {
        SyntheticId::F1 => {
            let mut s = pairs_in(0..10);
            s.extend((10..20).flat_map(|i| (20..30).map(move |j| (i, j))));
            s
        }
        SyntheticId::F2 | SyntheticId::F3 => pairs_in(0..20).union(&pairs_in(10..30)).copied().collect(),
        SyntheticId::F4 => pairs_in(0..3).union(&pairs_in(10..30)).copied().collect(),
        SyntheticId::Custom => unreachable!(),
    }
}

/// Squared mixed difference at the context where every feature other than
/// `i`, `j` sits at `fill` (unit steps).
fn corner_omega(f: impl Fn(&[f64]) -> f64, fill: f64, i: usize, j: usize) -> f64 {
    let at = |a: f64, b: f64| {
        let mut v = vec![fill; P];
        v[i] = a;
        v[j] = b;
        f(&v)
    };
    let d = at(1.0, 1.0) - at(-1.0, 1.0) - at(1.0, -1.0) + at(-1.0, -1.0);
    d * d
}

/// Probability a random positive outranks a random negative, ties half.
fn brute_auc(scores: &[(f64, bool)]) -> f64 {
    let pos: Vec<f64> = scores.iter().filter(|s| s.1).map(|s| s.0).collect();
    let neg: Vec<f64> = scores.iter().filter(|s| !s.1).map(|s| s.0).collect();
    let mut wins = 0.0;
    for &a in &pos {
        for &b in &neg {
            wins += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn bench_box(id: SyntheticId) -> BlackBox {
    let f = SyntheticFunction::bench(id);
    BlackBox::from_fn(f.space(HConvention::Unit), move |v| f.eval(v))
}

// ---------------------------------------------------------------- criteria

fn c1_archdetect_auc() -> Outcome {
    let start = Instant::now();
    for id in SyntheticId::BENCH {
        check(SyntheticFunction::bench(id).ground_truth_pairs() == truth(id), format!("{id}: ground truth differs"))?;
        let bb = bench_box(id);
        let r = detect_pairs(&bb, &DetectorConfig::default()).map_err(|e| e.to_string())?;
        let scores: Vec<(f64, bool)> = r.pairs.iter().map(|s| (s.strength, truth(id).contains(&(s.i, s.j)))).collect();
        check(brute_auc(&scores) == 1.0, format!("{id}: brute AUC {}", brute_auc(&scores)))?;
        check(r.auc(&truth(id)) == Some(1.0), format!("{id}: library AUC {:?}", r.auc(&truth(id))))?;
        check(bb.call_count() <= 1682, format!("{id}: {} evaluations", bb.call_count()))?;
    }
    let out = Command::new(BIN).arg("bench").output().map_err(|e| e.to_string())?;
    check(out.status.success(), "bench failed")?;
    let text = String::from_utf8_lossy(&out.stdout);
    let ones = text.lines().filter(|l| l.contains(",archdetect,1.0,")).count();
    check(ones == 4, format!("bench archdetect rows at 1.0: {ones}"))?;
    let t = start.elapsed();
    check(t < Duration::from_secs(5), format!("took {t:?}"))?;
    Ok(format!("AUC 1.0 on F1..F4 (library, brute-force oracle and `bench`), {t:.2?}"))
}

fn c2_context_failure_modes() -> Outcome {
    // F3 at the all-target context: the baseline-triggered block outside the overlap is invisible
    let f3 = |v: &[f64]| bench_f(SyntheticId::F3, v);
    let hidden: Vec<(usize, usize)> = pairs_in(0..20).difference(&pairs_in(10..20)).copied().collect();
    for &(i, j) in &hidden {
        check(corner_omega(f3, 1.0, i, j) == 0.0, format!("oracle: F3 ({i},{j}) nonzero at target"))?;
        check(corner_omega(f3, -1.0, i, j) > 0.0, format!("oracle: F3 ({i},{j}) zero at baseline"))?;
    }
    let bb = bench_box(SyntheticId::F3);
    let r = detect_pairs(&bb, &DetectorConfig::with_contexts(ContextRegime::TargetOnly)).map_err(|e| e.to_string())?;
    for &(i, j) in &hidden {
        check(r.strength(i, j) == Some(0.0), format!("F3 target-only ({i},{j}) = {:?}", r.strength(i, j)))?;
    }
    let scores: Vec<(f64, bool)> = r.pairs.iter().map(|s| (s.strength, truth(SyntheticId::F3).contains(&(s.i, s.j)))).collect();
    let want = brute_auc(&scores);
    check(want == 262.5 / 335.0, format!("F3 target-only oracle AUC {want}"))?;
    check(r.auc(&truth(SyntheticId::F3)) == Some(want), "F3 target-only library AUC")?;

    // F2 at the all-baseline context: both target-triggered blocks vanish
    let f2 = |v: &[f64]| bench_f(SyntheticId::F2, v);
    let bb = bench_box(SyntheticId::F2);
    let r = detect_pairs(&bb, &DetectorConfig::with_contexts(ContextRegime::BaselineOnly)).map_err(|e| e.to_string())?;
    for &(i, j) in &truth(SyntheticId::F2) {
        check(corner_omega(f2, -1.0, i, j) == 0.0, format!("oracle: F2 ({i},{j}) nonzero at baseline"))?;
        check(corner_omega(f2, 1.0, i, j) > 0.0, format!("oracle: F2 ({i},{j}) zero at target"))?;
        check(r.strength(i, j) == Some(0.0), format!("F2 baseline-only ({i},{j})"))?;
    }
    let auc = r.auc(&truth(SyntheticId::F2));
    check(auc == Some(0.5), format!("F2 baseline-only AUC {auc:?}"))?;

    // every per-context strength equals the oracle at both contexts
    for id in SyntheticId::BENCH {
        let bb = bench_box(id);
        let r = detect_pairs(&bb, &DetectorConfig::default()).map_err(|e| e.to_string())?;
        for s in &r.pairs {
            let f = |v: &[f64]| bench_f(id, v);
            check(s.context_value("target") == Some(corner_omega(f, 1.0, s.i, s.j)), format!("{id} ({},{}) target", s.i, s.j))?;
            check(s.context_value("baseline") == Some(corner_omega(f, -1.0, s.i, s.j)), format!("{id} ({},{}) baseline", s.i, s.j))?;
        }
    }
    Ok(format!(
        "target-only misses {} F3 pairs (AUC 262.5/335), baseline-only misses all 335 F2 pairs (AUC 0.5)",
        hidden.len()
    ))
}

/// Linear terms plus pairwise products: every interaction is the same in every context.
fn pairwise_poly(seed: u64) -> (PerturbationSpace, Vec<f64>, Vec<(usize, usize, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.gen_range(3..=12);
    let target: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let baseline: Vec<f64> = target.iter().map(|t| t - rng.gen_range(0.5..2.0)).collect();
    let linear: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut products = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            if rng.gen_bool(0.3) {
                products.push((i, j, rng.gen_range(-3.0..3.0)));
            }
        }
    }
    let h = if seed % 2 == 0 { HConvention::Unit } else { HConvention::Eq4 };
    (PerturbationSpace::new(target, baseline, h).unwrap(), linear, products)
}

fn poly_box(seed: u64) -> BlackBox {
    let (space, linear, products) = pairwise_poly(seed);
    BlackBox::from_fn(space, move |v| {
        let mut y: f64 = linear.iter().zip(v).map(|(a, x)| a * x).sum();
        for &(i, j, c) in &products {
            y += c * v[i] * v[j];
        }
        y
    })
}

fn c3_full_expectation_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let bb = poly_box(seed);
        let arch = detect_pairs(&bb, &DetectorConfig::default()).map_err(|e| e.to_string())?;
        let full = detect_pairs(&bb, &DetectorConfig::with_contexts(ContextRegime::FullExpectation)).map_err(|e| e.to_string())?;
        check(arch.order() == full.order(), format!("seed {seed}: rankings differ"))?;
        for s in &arch.pairs {
            let want = detect_full_expectation(&bb, s.i, s.j, 16).map_err(|e| e.to_string())?;
            let scale = want.abs().max(1e-12);
            let rel = (s.strength - want).abs() / scale;
            worst = worst.max(rel);
            check(rel <= 1e-9, format!("seed {seed} ({},{}): {} vs {want}", s.i, s.j, s.strength))?;
            check(full.strength(s.i, s.j) == Some(want), format!("seed {seed}: full regime disagrees"))?;
        }
    }
    Ok(format!("50 pairwise polynomials (p <= 12): max relative gap {worst:.1e}, identical rankings"))
}

fn c4_axioms() -> Outcome {
    let start = Instant::now();
    let reference = ReferenceHost::Bridge(BridgeCommand::new(BIN, vec!["serve".into()]));
    let cfg = AxiomConfig::new(2024, 200).with_reference(reference);
    let reports = run_axiom_suite_with(&cfg).map_err(|e| e.to_string())?;
    check(reports.len() == 8, "eight reports")?;
    let mut worst: f64 = 0.0;
    for r in &reports {
        check(r.passed && r.max_violation <= 1e-9, format!("{} failed: {:e}", r.axiom, r.max_violation))?;
        if r.axiom.to_string() != "relu_counterexample" {
            check(r.trials >= 200, format!("{} ran {} trials", r.axiom, r.trials))?;
        }
        worst = worst.max(r.max_violation);
    }
    let controls = run_axiom_suite_with(&cfg.clone().with_fault(DEFAULT_FAULT)).map_err(|e| e.to_string())?;
    for r in &controls {
        check(!r.passed, format!("negative control for {} passed", r.axiom))?;
    }
    let t = start.elapsed();
    check(t < Duration::from_secs(30), format!("took {t:?}"))?;
    Ok(format!("8 checks x 200 trials via bridge, max violation {worst:.1e}; 8/8 controls fail; {t:.2?}"))
}

fn c5_relu_regression() -> Outcome {
    let relu = |x: f64| x.max(0.0);
    let f = |v: &[f64]| relu(v[0] + v[2] + 1.0) + relu(v[1]) + 1.0;
    let (t, b) = (RELU_TARGET, RELU_BASELINE);
    check(relu(b[0] + b[2] + 1.0) == 0.0 && relu(b[1]) == 0.0, "baseline is not a root of both terms")?;
    let term1 = relu(t[0] + t[2] + 1.0);
    let term2 = relu(t[1]);
    check((term1, term2) == (3.5, 3.0), format!("frozen terms {term1}, {term2}"))?;

    let expr: Expr = RELU_EXPR.parse().map_err(|e| format!("{e}"))?;
    let space = PerturbationSpace::new(t.to_vec(), b.to_vec(), HConvention::Unit).map_err(|e| e.to_string())?;
    let bb = BlackBox::from_fn(space, move |v| expr.eval(v));
    let phi1 = arch_attribute(&bb, &FeatureSet::new([0, 2]).unwrap()).map_err(|e| e.to_string())?;
    let phi2 = arch_attribute(&bb, &FeatureSet::singleton(1)).map_err(|e| e.to_string())?;
    check(phi1 == 3.5 && phi2 == 3.0, format!("ArchAttribute gave {phi1}, {phi2}"))?;

    // four-corner interaction value over features 1 and 3 with 2 at baseline
    let at = |x1: f64, x3: f64| f(&[x1, b[1], x3]);
    let corner = at(t[0], t[2]) - at(t[0], b[2]) - at(b[0], t[2]) + at(b[0], b[2]);
    check(corner == 1.0, format!("frozen four-corner value {corner}"))?;
    check(corner != term1, "four-corner value matches the term")?;
    Ok(format!("ArchAttribute = (3.5, 3.0) exactly; four-corner value {corner} != 3.5"))
}

fn c6_call_count() -> Outcome {
    let bound = P * (P - 1) + 2 * P + 2;
    check(bound == 1642, "bound arithmetic")?;
    let mut counts = Vec::new();
    for id in SyntheticId::BENCH {
        let bb = bench_box(id);
        detect_pairs(&bb, &DetectorConfig::default()).map_err(|e| e.to_string())?;
        check(bb.call_count() as usize <= bound, format!("{id}: {} > {bound}", bb.call_count()))?;
        counts.push(bb.call_count());
    }
    Ok(format!("distinct evaluations at p=40: {counts:?} <= {bound}"))
}

fn c7_redundancy() -> Outcome {
    let start = Instant::now();
    let bb = bench_box(SyntheticId::F2);
    let k = truth(SyntheticId::F2).len();
    let curve = redundancy_curve(&bb, ContextSequence::Fixed, 10, k, 0).map_err(|e| e.to_string())?;
    for pt in curve.iter().filter(|pt| pt.n >= 3) {
        check(pt.overlap_ratio == 1.0, format!("F2 fixed n={}: {}", pt.n, pt.overlap_ratio))?;
    }
    let mut checked = 0;
    for seed in 0..10 {
        let bb = poly_box(seed);
        let nonzero = detect_pairs(&bb, &DetectorConfig::default()).map_err(|e| e.to_string())?.above(0.0).len();
        if nonzero == 0 {
            continue;
        }
        for seq in [ContextSequence::Fixed, ContextSequence::Random] {
            for pt in redundancy_curve(&bb, seq, 8, nonzero, seed).map_err(|e| e.to_string())? {
                check(pt.overlap_ratio == 1.0, format!("poly {seed} {seq} n={}: {}", pt.n, pt.overlap_ratio))?;
            }
        }
        checked += 1;
    }
    let f1 = bench_box(SyntheticId::F1);
    for pt in redundancy_curve(&f1, ContextSequence::Random, 10, truth(SyntheticId::F1).len(), 7).map_err(|e| e.to_string())? {
        check(pt.overlap_ratio == 1.0, format!("F1 random n={}: {}", pt.n, pt.overlap_ratio))?;
    }
    let t = start.elapsed();
    check(t < Duration::from_secs(10), format!("took {t:?}"))?;
    Ok(format!("F2 fixed ratio 1.0 for n>=3; F1 and {checked} pairwise polynomials 1.0 for n>=2; {t:.2?}"))
}

fn c8_determinism() -> Outcome {
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("detect.csv", vec!["detect", "--function", "F3", "--contexts", "random:4", "--seed", "11"]),
        ("bench.csv", vec!["bench", "--seed", "5"]),
        ("redundancy.csv", vec!["redundancy", "--function", "F2", "--n-max", "6", "--seed", "4"]),
        ("explain.json", vec!["explain", "--function", "F4", "--top-k", "3", "--method", "difference"]),
        ("axioms.json", vec!["axioms", "--trials", "5", "--seed", "8"]),
    ];
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    for (k, dir) in dirs.iter().enumerate() {
        for (name, args) in &runs {
            let out = dir.path().join(name);
            let mut args = args.clone();
            let out_s = out.to_str().unwrap().to_string();
            let workers = if k == 0 { "1" } else { "4" };
            if matches!(args[0], "detect" | "bench" | "explain") {
                args.extend(["--workers", workers]);
            }
            args.extend(["--out", &out_s]);
            let status = Command::new(BIN).args(&args).status().map_err(|e| e.to_string())?;
            check(status.success(), format!("{args:?} failed"))?;
        }
    }
    let mut files = 0;
    for (name, _) in &runs {
        for file in [name.to_string(), format!("{name}.manifest.json")] {
            let read = |d: &Path| std::fs::read(d.join(&file)).ok();
            let (a, b) = (read(dirs[0].path()), read(dirs[1].path()));
            check(a == b, format!("{file} differs between reruns"))?;
            files += usize::from(a.is_some());
        }
    }
    Ok(format!("{files} output files byte-identical across reruns (1 vs 4 workers)"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 ArchDetect ranking AUC on F1-F4", c1_archdetect_auc),
        ("2 context-regime failure modes", c2_context_failure_modes),
        ("3 full-expectation oracle equivalence", c3_full_expectation_oracle),
        ("4 axiom suite and negative controls", c4_axioms),
        ("5 ReLU set-attribution regression", c5_relu_regression),
        ("6 call-count bound", c6_call_count),
        ("7 redundancy curve shape", c7_redundancy),
        ("8 CLI determinism", c8_determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
