//! The `lipcert` command-line front end.
//!
//! Every subcommand builds its whole output in memory and writes it once,
//! so identical arguments give byte-identical files. Timings are only
//! written with `--timings`.

use crate::benchgen::{BenchSpec, CnnModel, X2Variant, XyVariant};
use crate::bounds_conv::{brute_force_k_conv, network_report};
use crate::bounds_dense::{bound_report, brute_force_k};
use crate::error::Error;
use crate::linalg::NormKind;
use crate::lowering::{lower_network, Approach, LoweredPlan, PlanBlock};
use crate::netmodel::{self, NetworkSpec};
use crate::par::{limit_threads, Execution};
use crate::report::{BoundConfig, BoundKind, BoundReport};
use crate::study::{growth_study, random_study, Family, RATIO_BOUNDS};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "LIPCERT_THREADS";

/// Column header of every bound CSV.
pub const CSV_HEADER: [&str; 7] = ["model", "norm", "approach", "bound", "value", "time_ms", "terms"];

#[derive(Debug, Parser)]
#[command(name = "lipcert", version, about = "Certified Lipschitz upper bounds for ReLU networks")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run every engine on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute K*, K1, K2, K3, K4 (and optionally K) for a network.
    Bounds(BoundsArgs),
    /// Compute the exact activation-relaxed constant K by enumeration.
    BruteForce(TargetArgs),
    /// Describe the lowered plan of a network.
    Lower(LowerArgs),
    /// Evaluate a network (and optionally its Jacobian) at a point.
    Eval(EvalArgs),
    /// Ratio statistics of the bounds over random dense networks.
    StudyRandom(StudyArgs),
    /// Bound series and growth rates over the depth of a constructive net.
    Growth(GrowthArgs),
    /// Explicit and implicit bounds in l1 and l∞ for an MNIST-shaped CNN.
    CompareCnn(CompareArgs),
    /// Write a generated benchmark network as interchange JSON.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Generator {
    X2,
    Xy,
    Random,
    Cnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["net", "gen"])))]
struct Source {
    /// Network in the interchange JSON format.
    #[arg(long)]
    net: Option<PathBuf>,
    /// Generate a benchmark network instead of loading one.
    #[arg(long, value_enum)]
    gen: Option<Generator>,
    /// x² depth ℓ, or number of xy series terms n.
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// x²: symmetric|asymmetric; xy: hat-a|hat-b.
    #[arg(long)]
    variant: Option<String>,
    /// Layer widths of a random net, input first.
    #[arg(long, value_delimiter = ',', default_value = "8,10,6,3")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CNN architecture: A, B or C.
    #[arg(long, default_value = "A", value_parser = parse_model)]
    model: CnnModel,
}

#[derive(Debug, Args)]
struct Caps {
    /// Maximum number of splits in the K1/K4 subset sums.
    #[arg(long, value_parser = positive)]
    depth_cap: Option<usize>,
    /// Maximum activation-layer width for K2.
    #[arg(long, value_parser = positive)]
    width_cap: Option<usize>,
    /// Maximum number of selector bits for brute-force K.
    #[arg(long, value_parser = positive)]
    neuron_cap: Option<usize>,
}

#[derive(Debug, Args)]
struct Output {
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Record wall-clock times (makes output run-dependent).
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    target: TargetArgs,
    /// Also compute the brute-force constant K (skipped above the neuron cap).
    #[arg(long)]
    brute: bool,
}

#[derive(Debug, Args)]
struct TargetArgs {
    #[command(flatten)]
    source: Source,
    /// Norms, comma separated: l1, l2, linf.
    #[arg(long, value_delimiter = ',', default_value = "linf", value_parser = parse_norm)]
    norm: Vec<NormKind>,
    /// Max-pool approaches for convolutional networks.
    #[arg(long, value_delimiter = ',', default_value = "explicit,implicit", value_parser = parse_approach)]
    approach: Vec<Approach>,
    #[command(flatten)]
    caps: Caps,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Args)]
struct LowerArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value = "explicit", value_parser = parse_approach)]
    approach: Approach,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("point").required(true).args(["input", "input_file"])))]
struct EvalArgs {
    #[command(flatten)]
    source: Source,
    /// Input vector, comma separated, in the network's flattened layout.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    input: Option<Vec<f64>>,
    /// JSON array holding the input vector.
    #[arg(long)]
    input_file: Option<PathBuf>,
    /// Also write the Jacobian at the input.
    #[arg(long)]
    jacobian: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[arg(long, value_delimiter = ',', default_value = "8,10,6,3")]
    dims: Vec<usize>,
    /// Number of realizations.
    #[arg(long, default_value_t = 1000, value_parser = positive)]
    count: usize,
    /// Seed of the first realization; the others follow consecutively.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "linf", value_parser = parse_norm)]
    norm: NormKind,
    /// Also write per-realization ratios to this CSV file.
    #[arg(long)]
    per_seed: Option<PathBuf>,
    #[command(flatten)]
    caps: Caps,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    X2,
    Xy,
}

#[derive(Debug, Args)]
struct GrowthArgs {
    #[arg(long, value_enum, default_value = "x2")]
    family: FamilyArg,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long, default_value_t = 1)]
    from: usize,
    #[arg(long, default_value_t = 6)]
    to: usize,
    #[arg(long, value_delimiter = ',', default_value = "linf", value_parser = parse_norm)]
    norm: Vec<NormKind>,
    #[command(flatten)]
    caps: Caps,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// CNN architecture: A, B or C.
    #[arg(long, default_value = "A", value_parser = parse_model)]
    model: CnnModel,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use these weights instead of a random-weight model.
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "l1,linf", value_parser = parse_norm)]
    norm: Vec<NormKind>,
    #[command(flatten)]
    caps: Caps,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be positive".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_norm(s: &str) -> Result<NormKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_approach(s: &str) -> Result<Approach, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_model(s: &str) -> Result<CnnModel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Why a command failed: bad usage or a library error with its own code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Lib(e) => e.exit_code() as u8,
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Float formatting used in every CSV: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn config(caps: &Caps, base: BoundConfig, exec: Execution) -> BoundConfig {
    let mut cfg = base.with_exec(exec);
    if let Some(v) = caps.depth_cap {
        cfg.depth_cap = v;
    }
    if let Some(v) = caps.width_cap {
        cfg.width_cap = v;
    }
    if let Some(v) = caps.neuron_cap {
        cfg.neuron_cap = v;
    }
    cfg
}

impl Source {
    fn bench(&self) -> CliResult<BenchSpec> {
        let variant = self.variant.as_deref();
        Ok(match self.gen {
            Some(Generator::X2) => BenchSpec::X2 {
                depth: self.depth,
                variant: variant.map_or(Ok(X2Variant::Symmetric), str::parse).map_err(usage)?,
            },
            Some(Generator::Xy) => BenchSpec::Xy {
                terms: self.depth,
                variant: variant.map_or(Ok(XyVariant::HatA), str::parse).map_err(usage)?,
            },
            Some(Generator::Random) => BenchSpec::Random { dims: self.dims.clone(), seed: self.seed },
            Some(Generator::Cnn) => BenchSpec::Cnn { model: self.model, seed: self.seed },
            None => return Err(Failure::Usage("either --net or --gen is required".into())),
        })
    }

    fn load(&self) -> CliResult<NetworkSpec> {
        match &self.net {
            Some(path) => Ok(netmodel::load_path(path)?),
            None => Ok(self.bench()?.build()?),
        }
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn emit(path: Option<&PathBuf>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(bytes).and_then(|_| out.flush()) {
                // reader went away, e.g. piped into `head`
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r.map_err(Error::from)?,
            }
        }
    }
    Ok(())
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::Lib(Error::Io(e.to_string()));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.into_inner().map_err(|e| Failure::Lib(Error::Io(e.to_string())))
}

fn json_bytes<T: serde::Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// CSV rows of a report, one per bound; skipped bounds have an empty value.
pub fn report_rows(r: &BoundReport, timings: bool) -> Vec<Vec<String>> {
    r.entries
        .iter()
        .map(|e| {
            vec![
                r.model.clone(),
                r.norm.to_string(),
                r.approach_label().to_string(),
                e.bound.to_string(),
                e.value.map(fmt_f64).unwrap_or_default(),
                if timings { format!("{:.3}", e.time_ms) } else { String::new() },
                e.terms.map(|t| t.to_string()).unwrap_or_default(),
            ]
        })
        .collect()
}

fn write_reports(mut reports: Vec<BoundReport>, out: &Output) -> CliResult<()> {
    for r in &reports {
        for e in &r.entries {
            if let Some(why) = &e.skipped {
                eprintln!("note: {} {} {} {} skipped: {why}", r.model, r.norm, r.approach_label(), e.bound);
            }
        }
    }
    if !out.timings {
        reports.iter_mut().flat_map(|r| r.entries.iter_mut()).for_each(|e| e.time_ms = 0.0);
    }
    let bytes = match out.format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = reports.iter().flat_map(|r| report_rows(r, out.timings)).collect();
            csv_bytes(&CSV_HEADER, &rows)?
        }
        Format::Json => json_bytes(&reports)?,
    };
    emit(out.output.as_ref(), &bytes)
}

/// All reports for `net`: one per norm for dense networks, one per
/// approach and norm otherwise. Ordering invariants are checked.
fn reports_for(
    net: &NetworkSpec,
    norms: &[NormKind],
    approaches: &[Approach],
    brute: bool,
    caps: &Caps,
    exec: Execution,
) -> CliResult<Vec<BoundReport>> {
    let mut out = Vec::new();
    if net.is_dense_only() {
        let cfg = config(caps, BoundConfig::dense(), exec);
        for &p in norms {
            out.push(bound_report(net, p, brute, &cfg)?);
        }
    } else {
        let cfg = config(caps, BoundConfig::conv(), exec);
        for &a in approaches {
            for &p in norms {
                out.push(network_report(net, a, p, brute, &cfg)?);
            }
        }
    }
    for r in &out {
        r.check_invariants()?;
    }
    Ok(out)
}

fn cmd_bounds(args: &BoundsArgs, exec: Execution) -> CliResult<()> {
    let t = &args.target;
    let net = t.source.load()?;
    let reports = reports_for(&net, &t.norm, &t.approach, args.brute, &t.caps, exec)?;
    write_reports(reports, &t.out)
}

fn cmd_brute_force(args: &TargetArgs, exec: Execution) -> CliResult<()> {
    let net = args.source.load()?;
    let mut rows = Vec::new();
    let mut push = |p: NormKind, approach: &str, run: &dyn Fn() -> crate::Result<f64>| -> CliResult<()> {
        let start = std::time::Instant::now();
        let v = run()?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        rows.push(vec![
            net.name().to_string(),
            p.to_string(),
            approach.to_string(),
            BoundKind::KBrute.to_string(),
            fmt_f64(v),
            if args.out.timings { format!("{ms:.3}") } else { String::new() },
            String::new(),
        ]);
        Ok(())
    };
    if net.is_dense_only() {
        let cfg = config(&args.caps, BoundConfig::dense(), exec);
        for &p in &args.norm {
            push(p, "dense", &|| brute_force_k(&net, p, &cfg))?;
        }
    } else {
        let cfg = config(&args.caps, BoundConfig::conv(), exec);
        for &a in &args.approach {
            let plan = lower_network(&net, a)?;
            for &p in &args.norm {
                push(p, a.as_str(), &|| brute_force_k_conv(&plan, p, &cfg))?;
            }
        }
    }
    let bytes = match args.out.format {
        Format::Csv => csv_bytes(&CSV_HEADER, &rows)?,
        Format::Json => json_bytes(
            &rows
                .iter()
                .map(|r| json!({"model": r[0], "norm": r[1], "approach": r[2], "bound": r[3], "value": r[4].parse::<f64>().unwrap()}))
                .collect::<Vec<_>>(),
        )?,
    };
    emit(args.out.output.as_ref(), &bytes)
}

/// JSON description of a plan: block kinds, shapes and sparsity.
pub fn describe_plan(net: &NetworkSpec, plan: &LoweredPlan) -> serde_json::Value {
    let blocks: Vec<serde_json::Value> = plan
        .blocks
        .iter()
        .map(|b| match b {
            PlanBlock::Linear(l) => json!({
                "kind": "linear",
                "origin": l.origin,
                "rows": l.matrix.rows(),
                "cols": l.matrix.cols(),
                "nnz": l.matrix.nnz(),
            }),
            PlanBlock::Relu { width } => json!({"kind": "relu", "width": width}),
            PlanBlock::MaxPoolExplicit(m) => json!({
                "kind": "maxpool_explicit",
                "stages": m.stages.iter().map(|s| json!({
                    "axis": format!("{:?}", s.axis).to_lowercase(),
                    "rows": s.m_plus.rows(),
                    "cols": s.m_plus.cols(),
                })).collect::<Vec<_>>(),
            }),
            PlanBlock::MaxPoolImplicit(m) => json!({
                "kind": "maxpool_implicit",
                "windows": m.windows.len(),
                "window_size": m.window_size,
                "cols": m.ones.cols(),
            }),
        })
        .collect();
    let layers: Vec<serde_json::Value> = net
        .layers()
        .iter()
        .zip(net.shapes().iter().skip(1))
        .map(|(l, s)| {
            let mut v = json!({"kind": l.kind_name(), "output": s.dims()});
            if let netmodel::LayerSpec::Conv2d(c) = l {
                v["kernel"] = json!([c.kernel.kh, c.kernel.kw]);
                v["stride"] = json!([c.stride.0, c.stride.1]);
                v["padding"] = json!(format!("{:?}", c.padding).to_lowercase());
            }
            if let netmodel::LayerSpec::AvgPool2d(p) | netmodel::LayerSpec::MaxPool2d(p) = l {
                v["pool"] = json!([p.pool.0, p.pool.1]);
                v["stride"] = json!([p.stride.0, p.stride.1]);
            }
            v
        })
        .collect();
    let depth = crate::subsets::SplitChain::from_plan(plan).map(|c| c.depth()).ok();
    json!({
        "model": net.name(),
        "approach": plan.approach,
        "input_dim": plan.input_dim,
        "output_dim": plan.output_dim(),
        "splits": depth,
        "layers": layers,
        "blocks": blocks,
    })
}

fn cmd_lower(args: &LowerArgs) -> CliResult<()> {
    let net = args.source.load()?;
    let plan = lower_network(&net, args.approach)?;
    emit(args.output.as_ref(), &json_bytes(&describe_plan(&net, &plan))?)
}

fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let net = args.source.load()?;
    let x: Vec<f64> = match (&args.input, &args.input_file) {
        (Some(v), _) => v.clone(),
        (None, Some(p)) => {
            let bytes = std::fs::read(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            serde_json::from_slice(&bytes).map_err(|e| Error::Parse(format!("input file: {e}")))?
        }
        (None, None) => return Err(Failure::Usage("either --input or --input-file is required".into())),
    };
    let mut v = json!({"model": net.name(), "output": net.forward(&x)?});
    if args.jacobian {
        v["jacobian"] = json!(net.jacobian_at(&x)?.to_rows());
    }
    emit(args.output.as_ref(), &json_bytes(&v)?)
}

fn cmd_study_random(args: &StudyArgs, exec: Execution) -> CliResult<()> {
    let cfg = config(&args.caps, BoundConfig::dense(), exec);
    let study = random_study(&args.dims, args.seed, args.count, args.norm, &cfg)?;
    let mut header = vec!["statistic".to_string()];
    header.extend(RATIO_BOUNDS.iter().map(|b| format!("{b}/K*")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    if let Some(path) = &args.per_seed {
        let mut h = vec!["seed"];
        h.extend(&header_refs[1..]);
        let rows: Vec<Vec<String>> = study
            .realizations
            .iter()
            .map(|r| std::iter::once(r.seed.to_string()).chain(r.ratios.iter().map(|&v| fmt_f64(v))).collect())
            .collect();
        emit(Some(path), &csv_bytes(&h, &rows)?)?;
    }
    let stats: [(&str, fn(&crate::study::Summary) -> f64); 4] = [
        ("maximum", |s| s.max),
        ("average", |s| s.avg),
        ("minimum", |s| s.min),
        ("std", |s| s.std),
    ];
    let rows: Vec<Vec<String>> = stats
        .iter()
        .map(|(name, f)| std::iter::once(name.to_string()).chain(study.summaries.iter().map(|s| fmt_f64(f(s)))).collect())
        .collect();
    emit(args.output.as_ref(), &csv_bytes(&header_refs, &rows)?)
}

fn cmd_growth(args: &GrowthArgs, exec: Execution) -> CliResult<()> {
    let variant = args.variant.as_deref();
    let family = match args.family {
        FamilyArg::X2 => Family::X2(variant.map_or(Ok(X2Variant::Symmetric), str::parse).map_err(usage)?),
        FamilyArg::Xy => Family::Xy(variant.map_or(Ok(XyVariant::HatA), str::parse).map_err(usage)?),
    };
    let (fam, var) = match family {
        Family::X2(v) => ("x2", v.to_string()),
        Family::Xy(v) => ("xy", v.to_string()),
    };
    if args.to < args.from + 2 {
        return Err(Failure::Usage("growth needs a depth range of at least 3 values".into()));
    }
    let cfg = config(&args.caps, BoundConfig::dense(), exec);
    let mut rows = Vec::new();
    for &p in &args.norm {
        for s in growth_study(family, args.from..=args.to, p, &cfg)? {
            for (i, (&d, &v)) in s.depths.iter().zip(&s.values).enumerate() {
                let g = match s.growth.get(i) {
                    Some(Some(g)) => fmt_f64(*g),
                    Some(None) => "degenerate".to_string(),
                    None => String::new(),
                };
                rows.push(vec![
                    fam.to_string(),
                    var.clone(),
                    p.to_string(),
                    s.bound.to_string(),
                    d.to_string(),
                    fmt_f64(v),
                    g,
                ]);
            }
        }
    }
    let header = ["family", "variant", "norm", "bound", "depth", "value", "growth"];
    emit(args.output.as_ref(), &csv_bytes(&header, &rows)?)
}

fn cmd_compare_cnn(args: &CompareArgs, exec: Execution) -> CliResult<()> {
    let net = match &args.net {
        Some(p) => netmodel::load_path(p)?,
        None => BenchSpec::Cnn { model: args.model, seed: args.seed }.build()?,
    };
    let approaches = [Approach::Explicit, Approach::Implicit];
    let reports = reports_for(&net, &args.norm, &approaches, false, &args.caps, exec)?;
    for &p in &args.norm {
        let find = |a: Approach, b: BoundKind| {
            reports.iter().find(|r| r.norm == p && r.approach == Some(a)).and_then(|r| r.get(b))
        };
        if let (Some(k4), Some(ks)) = (find(Approach::Implicit, BoundKind::K4), find(Approach::Explicit, BoundKind::KStar)) {
            eprintln!("observation: {} {p}: implicit K4 < explicit K*: {}", net.name(), k4 < ks);
        }
    }
    write_reports(reports, &args.out)
}

fn cmd_gen(args: &GenArgs) -> CliResult<()> {
    let net = args.source.load()?;
    emit(args.output.as_ref(), netmodel::save(&net).as_bytes())
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match &cli.command {
        Command::Bounds(a) => cmd_bounds(a, exec),
        Command::BruteForce(a) => cmd_brute_force(a, exec),
        Command::Lower(a) => cmd_lower(a),
        Command::Eval(a) => cmd_eval(a),
        Command::StudyRandom(a) => cmd_study_random(a, exec),
        Command::Growth(a) => cmd_growth(a, exec),
        Command::CompareCnn(a) => cmd_compare_cnn(a, exec),
        Command::Gen(a) => cmd_gen(a),
    }
}

/// Entry point of the binary: parses arguments, applies the thread cap
/// and maps failures to exit codes.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => limit_threads(n),
            _ => {
                eprintln!("lipcert: error [usage]: {THREADS_ENV} must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(msg) => eprintln!("lipcert: error [usage]: {msg}"),
                Failure::Lib(e) => eprintln!("lipcert: error [{}]: {e}", e.code()),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
