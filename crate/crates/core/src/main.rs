use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use archipelago::axioms::{run_axiom_suite_with, AxiomConfig, AxiomReport, ReferenceHost, DEFAULT_FAULT};
use archipelago::bridge::{serve, BridgeCommand, WireMode};
use archipelago::detect::DEFAULT_FULL_CAP;
use archipelago::expr::Expr;
use archipelago::{
    bridge_open, detect_pairs, explain, omega_pair, random_gam, redundancy_curve, BlackBox,
    Context, ContextRegime, ContextSequence, DetectorConfig, Error, HConvention, Method,
    PerturbationSpace, SyntheticFunction, SyntheticId,
};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "archipelago", version, about = "Interaction detection and attribution for black-box functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank every feature pair by interaction strength.
    Detect(DetectArgs),
    /// Merge top pairs into islands and attribute each.
    Explain(ExplainArgs),
    /// Pairwise ranking AUC of the synthetic functions per context regime.
    Bench(BenchArgs),
    /// Top-k overlap as contexts are added.
    Redundancy(RedundancyArgs),
    /// Run the axiom checks on random instances.
    Axioms(AxiomsArgs),
    /// Host a function over the line-delimited JSON protocol on stdin/stdout.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum HArg {
    Unit,
    Eq4,
}

impl From<HArg> for HConvention {
    fn from(h: HArg) -> Self {
        match h {
            HArg::Unit => HConvention::Unit,
            HArg::Eq4 => HConvention::Eq4,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Vector,
    Mask,
}

impl From<ModeArg> for WireMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Vector => WireMode::Vector,
            ModeArg::Mask => WireMode::Mask,
        }
    }
}

#[derive(Args)]
#[group(skip)]
#[command(group(ArgGroup::new("source").required(true).args(["function", "expr", "bridge"])))]
struct SourceArgs {
    /// Synthetic benchmark function (F1..F4).
    #[arg(long)]
    function: Option<SyntheticId>,
    /// Arithmetic expression over x1..xp.
    #[arg(long)]
    expr: Option<String>,
    /// Command that hosts the model over the bridge protocol.
    #[arg(long)]
    bridge: Option<String>,
    #[arg(long, value_enum, default_value = "vector")]
    bridge_mode: ModeArg,
    /// Seconds to wait for each bridge reply.
    #[arg(long, default_value_t = 30.0)]
    bridge_timeout: f64,
    /// Target vector: comma-separated values or a file.
    #[arg(long, allow_hyphen_values = true)]
    target: Option<String>,
    /// Baseline vector: comma-separated values or a file.
    #[arg(long, allow_hyphen_values = true)]
    baseline: Option<String>,
    #[arg(long, value_enum, default_value = "unit")]
    h: HArg,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value = "archdetect")]
    contexts: ContextRegime,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest p accepted by `--contexts full`.
    #[arg(long, default_value_t = DEFAULT_FULL_CAP)]
    full_cap: usize,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output CSV; the manifest goes to `<out>.manifest.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add wall time to the manifest (makes it differ between runs).
    #[arg(long)]
    record_timing: bool,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    top_k: usize,
    #[arg(long, default_value = "archattribute")]
    method: Method,
    #[arg(long, default_value = "archdetect")]
    contexts: ContextRegime,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_FULL_CAP)]
    full_cap: usize,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    record_timing: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated subset of F1..F4.
    #[arg(long, value_delimiter = ',', default_value = "F1,F2,F3,F4")]
    functions: Vec<SyntheticId>,
    /// Number of contexts in the random regime.
    #[arg(long, default_value_t = 8)]
    random: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "unit")]
    h: HArg,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    record_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SequenceArg {
    Fixed,
    Random,
    Both,
}

#[derive(Args)]
struct RedundancyArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Pairs compared per step; defaults to the ground-truth pair count of a synthetic function.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 10)]
    n_max: usize,
    #[arg(long, value_enum, default_value = "both")]
    sequence: SequenceArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    record_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceArg {
    /// This binary's `serve --gam` over the bridge.
    Bridge,
    /// The in-process expression interpreter.
    Expression,
}

#[derive(Args)]
struct AxiomsArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Inject an off-by-constant fault; every report should fail.
    #[arg(long)]
    negative_controls: bool,
    #[arg(long, value_enum, default_value = "bridge")]
    reference: ReferenceArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("model").required(true).args(["function", "expr", "gam", "sum"])))]
struct ServeArgs {
    #[arg(long)]
    function: Option<SyntheticId>,
    #[arg(long)]
    expr: Option<String>,
    /// Random additive instance `SEED:P:SETS`.
    #[arg(long)]
    gam: Option<String>,
    /// Sum of the inputs.
    #[arg(long)]
    sum: bool,
    /// Dimension announced in the handshake.
    #[arg(long)]
    p: Option<usize>,
    /// Target for mask-mode clients.
    #[arg(long, allow_hyphen_values = true)]
    target: Option<String>,
    /// Baseline for mask-mode clients.
    #[arg(long, allow_hyphen_values = true)]
    baseline: Option<String>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
    Io(PathBuf, io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Lib(e) if e.is_evaluation() => 3,
            Failure::Lib(Error::Capacity { .. }) => 4,
            Failure::Lib(_) => 2,
            Failure::Io(..) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::Io(path, e) => write!(f, "{}: {e}", path.display()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SourceDesc {
    Synthetic { name: String },
    Expression { expr: String },
    Bridge { command: String, mode: WireMode },
}

#[derive(Serialize)]
struct SpaceDesc {
    p: usize,
    h: &'static str,
    target: Vec<f64>,
    baseline: Vec<f64>,
}

impl SpaceDesc {
    fn of(space: &PerturbationSpace, h: HConvention) -> Self {
        Self {
            p: space.p(),
            h: h.as_str(),
            target: space.target().to_vec(),
            baseline: space.baseline().to_vec(),
        }
    }
}

#[derive(Serialize, Default)]
struct ConfigDesc {
    #[serde(skip_serializing_if = "Option::is_none")]
    contexts: Option<String>,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    full_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    top_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    functions: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    random_contexts: Option<usize>,
}

#[derive(Serialize)]
struct RunManifest {
    schema_version: u32,
    tool: String,
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<SourceDesc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    space: Option<SpaceDesc>,
    config: ConfigDesc,
    call_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_ms: Option<f64>,
}

impl RunManifest {
    fn new(command: &'static str, config: ConfigDesc) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: format!("archipelago {}", env!("CARGO_PKG_VERSION")),
            command,
            source: None,
            space: None,
            config,
            call_count: 0,
            auc: None,
            wall_time_ms: None,
        }
    }

    fn timing(&mut self, record: bool, started: Instant) {
        if record {
            self.wall_time_ms = Some(started.elapsed().as_secs_f64() * 1e3);
        }
    }
}

struct Source {
    bb: BlackBox,
    desc: SourceDesc,
    h: HConvention,
    truth: Option<BTreeSet<(usize, usize)>>,
}

/// Parses a vector given inline (`1,2,3`) or as the path of a file holding one.
fn parse_vector(flag: &str, s: &str) -> CliResult<Vec<f64>> {
    let path = Path::new(s);
    let text = if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))?
    } else {
        s.to_string()
    };
    let values = text
        .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .map(|w| {
            w.parse::<f64>()
                .map_err(|_| Failure::Usage(format!("--{flag}: `{w}` is not a number")))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(Failure::Usage(format!("--{flag} is empty")));
    }
    Ok(values)
}

fn vectors(target: &Option<String>, baseline: &Option<String>) -> CliResult<Option<(Vec<f64>, Vec<f64>)>> {
    match (target, baseline) {
        (Some(t), Some(b)) => Ok(Some((parse_vector("target", t)?, parse_vector("baseline", b)?))),
        (None, None) => Ok(None),
        _ => Err(Failure::Usage("--target and --baseline go together".into())),
    }
}

fn open_source(args: &SourceArgs) -> CliResult<Source> {
    let h: HConvention = args.h.into();
    let given = vectors(&args.target, &args.baseline)?;
    if let Some(id) = args.function {
        let f = SyntheticFunction::bench(id);
        let space = match given {
            Some((t, b)) => PerturbationSpace::new(t, b, h)?,
            None => f.space(h),
        };
        if space.p() != f.p {
            return Err(Error::Dimension {
                expected: f.p,
                actual: space.p(),
            }
            .into());
        }
        let truth = f.ground_truth_pairs();
        return Ok(Source {
            bb: BlackBox::from_fn(space, move |v| f.eval(v)),
            desc: SourceDesc::Synthetic { name: id.to_string() },
            h,
            truth: Some(truth),
        });
    }
    let (t, b) = given.ok_or_else(|| {
        Failure::Usage("--expr and --bridge need --target and --baseline".into())
    })?;
    let space = PerturbationSpace::new(t, b, h)?;
    if let Some(text) = &args.expr {
        let expr: Expr = text.parse()?;
        if expr.arity() > space.p() {
            return Err(Failure::Usage(format!(
                "expression uses x{} but the space has p = {}",
                expr.arity(),
                space.p()
            )));
        }
        return Ok(Source {
            bb: BlackBox::from_fn(space, move |v| expr.eval(v)),
            desc: SourceDesc::Expression { expr: text.clone() },
            h,
            truth: None,
        });
    }
    let line = args.bridge.as_deref().expect("clap requires a source");
    if !(args.bridge_timeout.is_finite() && args.bridge_timeout > 0.0) {
        return Err(Failure::Usage("--bridge-timeout must be positive".into()));
    }
    let command = BridgeCommand::parse(line)
        .map_err(|e| Failure::Usage(e.to_string()))?
        .with_mode(args.bridge_mode.into())
        .with_timeout(Duration::from_secs_f64(args.bridge_timeout));
    let desc = SourceDesc::Bridge {
        command: command.display(),
        mode: command.mode,
    };
    Ok(Source {
        bb: bridge_open(&command, space)?,
        desc,
        h,
        truth: None,
    })
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn write_output(out: Option<&Path>, content: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(|e| Failure::Io(path.to_path_buf(), e)),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_manifest(out: Option<&Path>, manifest: &RunManifest) -> CliResult<()> {
    if let Some(out) = out {
        let path = manifest_path(out);
        let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Failure::Io(path, e))?;
    }
    Ok(())
}

fn side_omega(bb: &BlackBox, i: usize, j: usize, ctx: &Context) -> archipelago::Result<f64> {
    if bb.space().is_inert(i) || bb.space().is_inert(j) {
        Ok(0.0)
    } else {
        omega_pair(bb, i, j, ctx)
    }
}

fn cmd_detect(args: DetectArgs) -> CliResult<()> {
    let started = Instant::now();
    let src = open_source(&args.source)?;
    let bb = &src.bb;
    let cfg = DetectorConfig {
        contexts: args.contexts.with_seed(args.seed),
        full_cap: args.full_cap,
        workers: args.workers,
        ..DetectorConfig::default()
    };
    let ranking = detect_pairs(bb, &cfg)?;
    let p = bb.p();

    let mut csv = format!("#schema_version={SCHEMA_VERSION}\ni,j,strength,omega_target,omega_baseline\n");
    for s in &ranking.pairs {
        let wt = match s.context_value("target") {
            Some(w) => w,
            None => side_omega(bb, s.i, s.j, &Context::target(p))?,
        };
        let wb = match s.context_value("baseline") {
            Some(w) => w,
            None => side_omega(bb, s.i, s.j, &Context::baseline(p))?,
        };
        let _ = writeln!(csv, "{},{},{},{},{}", s.i + 1, s.j + 1, num(s.strength), num(wt), num(wb));
    }

    let mut manifest = RunManifest::new(
        "detect",
        ConfigDesc {
            contexts: Some(cfg.contexts.to_string()),
            seed: args.seed,
            full_cap: (cfg.contexts == ContextRegime::FullExpectation).then_some(cfg.full_cap),
            ..ConfigDesc::default()
        },
    );
    manifest.auc = src.truth.as_ref().and_then(|t| ranking.auc(t));
    manifest.call_count = bb.call_count();
    manifest.space = Some(SpaceDesc::of(bb.space(), src.h));
    manifest.source = Some(src.desc);
    manifest.timing(args.record_timing, started);
    write_output(args.out.as_deref(), &csv)?;
    write_manifest(args.out.as_deref(), &manifest)
}

#[derive(Serialize)]
struct ExplainOutput {
    schema_version: u32,
    /// One-based feature indices.
    sets: Vec<Vec<usize>>,
    phi: Vec<f64>,
    method: Method,
    residual: f64,
    f_target: f64,
    f_baseline: f64,
    pairs_requested: usize,
    pairs_used: usize,
    manifest: RunManifest,
}

fn cmd_explain(args: ExplainArgs) -> CliResult<()> {
    let started = Instant::now();
    let src = open_source(&args.source)?;
    let bb = &src.bb;
    let cfg = DetectorConfig {
        contexts: args.contexts.with_seed(args.seed),
        full_cap: args.full_cap,
        workers: args.workers,
        ..DetectorConfig::default()
    };
    let ranking = detect_pairs(bb, &cfg)?;
    let e = explain(bb, &ranking, args.top_k, args.method)?;

    let mut manifest = RunManifest::new(
        "explain",
        ConfigDesc {
            contexts: Some(cfg.contexts.to_string()),
            seed: args.seed,
            full_cap: (cfg.contexts == ContextRegime::FullExpectation).then_some(cfg.full_cap),
            top_k: Some(args.top_k),
            method: Some(args.method),
            ..ConfigDesc::default()
        },
    );
    manifest.call_count = bb.call_count();
    manifest.space = Some(SpaceDesc::of(bb.space(), src.h));
    manifest.source = Some(src.desc);
    manifest.timing(args.record_timing, started);

    let out = ExplainOutput {
        schema_version: SCHEMA_VERSION,
        sets: e
            .sets
            .iter()
            .map(|s| s.indices().iter().map(|i| i + 1).collect())
            .collect(),
        phi: e.phi,
        method: e.method,
        residual: e.completeness_residual,
        f_target: e.f_target,
        f_baseline: e.f_baseline,
        pairs_requested: e.pairs_requested,
        pairs_used: e.pairs_used,
        manifest,
    };
    let mut text = serde_json::to_string_pretty(&out).expect("explanation serializes");
    text.push('\n');
    write_output(args.out.as_deref(), &text)
}

fn cmd_bench(args: BenchArgs) -> CliResult<()> {
    let started = Instant::now();
    if args.random == 0 {
        return Err(Failure::Usage("--random must be at least 1".into()));
    }
    let h: HConvention = args.h.into();
    let regimes = [
        ContextRegime::ArchDetect,
        ContextRegime::TargetOnly,
        ContextRegime::BaselineOnly,
        ContextRegime::Random {
            n: args.random,
            seed: args.seed,
        },
    ];
    let mut csv = format!("#schema_version={SCHEMA_VERSION}\nfunction,contexts,auc,evaluations\n");
    let mut total_calls = 0;
    for &id in &args.functions {
        let f = SyntheticFunction::bench(id);
        let truth = f.ground_truth_pairs();
        for regime in regimes {
            let g = f.clone();
            let bb = BlackBox::from_fn(f.space(h), move |v| g.eval(v));
            let cfg = DetectorConfig {
                contexts: regime,
                workers: args.workers,
                ..DetectorConfig::default()
            };
            let ranking = detect_pairs(&bb, &cfg)?;
            let auc = ranking
                .auc(&truth)
                .map_or_else(|| "nan".to_string(), num);
            let _ = writeln!(csv, "{id},{regime},{auc},{}", bb.call_count());
            total_calls += bb.call_count();
        }
    }
    let mut manifest = RunManifest::new(
        "bench",
        ConfigDesc {
            contexts: Some(
                regimes
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            seed: args.seed,
            functions: Some(args.functions.iter().map(ToString::to_string).collect()),
            random_contexts: Some(args.random),
            ..ConfigDesc::default()
        },
    );
    manifest.call_count = total_calls;
    manifest.timing(args.record_timing, started);
    write_output(args.out.as_deref(), &csv)?;
    write_manifest(args.out.as_deref(), &manifest)
}

fn cmd_redundancy(args: RedundancyArgs) -> CliResult<()> {
    let started = Instant::now();
    let src = open_source(&args.source)?;
    let k = match (args.k, &src.truth) {
        (Some(k), _) => k,
        (None, Some(t)) => t.len(),
        (None, None) => {
            return Err(Failure::Usage(
                "--k is required unless --function names a synthetic function".into(),
            ))
        }
    };
    let sequences: &[ContextSequence] = match args.sequence {
        SequenceArg::Fixed => &[ContextSequence::Fixed],
        SequenceArg::Random => &[ContextSequence::Random],
        SequenceArg::Both => &[ContextSequence::Fixed, ContextSequence::Random],
    };
    let mut csv = format!("#schema_version={SCHEMA_VERSION}\nsequence,n,overlap_ratio\n");
    for &seq in sequences {
        for point in redundancy_curve(&src.bb, seq, args.n_max, k, args.seed)? {
            let _ = writeln!(csv, "{seq},{},{}", point.n, num(point.overlap_ratio));
        }
    }
    let mut manifest = RunManifest::new(
        "redundancy",
        ConfigDesc {
            contexts: Some(
                sequences
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            seed: args.seed,
            k: Some(k),
            n_max: Some(args.n_max),
            ..ConfigDesc::default()
        },
    );
    manifest.call_count = src.bb.call_count();
    manifest.space = Some(SpaceDesc::of(src.bb.space(), src.h));
    manifest.source = Some(src.desc);
    manifest.timing(args.record_timing, started);
    write_output(args.out.as_deref(), &csv)?;
    write_manifest(args.out.as_deref(), &manifest)
}

#[derive(Serialize)]
struct AxiomsOutput {
    schema_version: u32,
    seed: u64,
    trials: usize,
    reference: &'static str,
    negative_controls: bool,
    reports: Vec<AxiomReport>,
}

fn cmd_axioms(args: AxiomsArgs) -> CliResult<()> {
    if args.trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    let (reference, name) = match args.reference {
        ReferenceArg::Expression => (ReferenceHost::Expression, "expression"),
        ReferenceArg::Bridge => {
            let exe = std::env::current_exe().map_err(|e| Failure::Io(PathBuf::from("<self>"), e))?;
            let command = BridgeCommand::new(exe.to_string_lossy(), vec!["serve".into()]);
            (ReferenceHost::Bridge(command), "bridge")
        }
    };
    let mut cfg = AxiomConfig::new(args.seed, args.trials).with_reference(reference);
    if args.negative_controls {
        cfg = cfg.with_fault(DEFAULT_FAULT);
    }
    let out = AxiomsOutput {
        schema_version: SCHEMA_VERSION,
        seed: args.seed,
        trials: args.trials,
        reference: name,
        negative_controls: args.negative_controls,
        reports: run_axiom_suite_with(&cfg)?,
    };
    let mut text = serde_json::to_string_pretty(&out).expect("reports serialize");
    text.push('\n');
    write_output(args.out.as_deref(), &text)
}

type HostFn = Box<dyn Fn(&[f64]) -> std::result::Result<f64, String>>;

fn parse_gam(text: &str) -> CliResult<(u64, usize, usize)> {
    let bad = || Failure::Usage(format!("--gam expects SEED:P:SETS, got `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    ))
}

fn cmd_serve(args: ServeArgs) -> CliResult<()> {
    let given = vectors(&args.target, &args.baseline)?;
    let (natural_p, space, f): (Option<usize>, Option<PerturbationSpace>, HostFn) =
        if let Some(id) = args.function {
            let f = SyntheticFunction::bench(id);
            let space = match given {
                Some((t, b)) => PerturbationSpace::new(t, b, HConvention::Unit)?,
                None => f.space(HConvention::Unit),
            };
            (Some(f.p), Some(space), Box::new(move |v| Ok(f.eval(v))))
        } else if let Some(text) = &args.gam {
            let (seed, p, sets) = parse_gam(text)?;
            let inst = random_gam(seed, p, sets)?;
            let space = inst.space(HConvention::Unit);
            (Some(p), Some(space), Box::new(move |v| Ok(inst.eval(v))))
        } else if let Some(text) = &args.expr {
            let expr: Expr = text.parse()?;
            let space = given
                .map(|(t, b)| PerturbationSpace::new(t, b, HConvention::Unit))
                .transpose()?;
            let p = space.as_ref().map_or(expr.arity(), PerturbationSpace::p);
            (Some(p), space, Box::new(move |v| Ok(expr.eval(v))))
        } else {
            let space = given
                .map(|(t, b)| PerturbationSpace::new(t, b, HConvention::Unit))
                .transpose()?;
            (
                space.as_ref().map(PerturbationSpace::p),
                space,
                Box::new(|v| Ok(v.iter().sum())),
            )
        };
    let p = args
        .p
        .or(natural_p)
        .ok_or_else(|| Failure::Usage("--sum needs --p or --target/--baseline".into()))?;
    let stdin = io::stdin();
    serve(BufReader::new(stdin.lock()), io::stdout().lock(), p, space.as_ref(), f)
        .map_err(|e| Failure::Io(PathBuf::from("<stdio>"), e))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Redundancy(a) => cmd_redundancy(a),
        Command::Axioms(a) => cmd_axioms(a),
        Command::Serve(a) => cmd_serve(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("archipelago: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
