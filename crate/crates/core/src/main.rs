//! `protoperf` command line. Exit codes: 0 success, 1 internal error,
//! 2 usage or input error.

use std::fmt::Display;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use protoperf::bench::records;
use protoperf::bench::{
    Aggregator, Backend, BackendError, Batching, BenchError, CostProfile, Harness, PrimitiveSpec, RustCryptoBackend,
    SweepConfig, SyntheticBackend,
};
use protoperf::category::Category;
use protoperf::estimator::{compare_protocols, estimate_protocol, write_verdicts, DEFAULT_TIE_EPSILON};
use protoperf::generator::{generate_corpus, CorpusSidecar, GenConfig};
use protoperf::model::{fit_cubic, merge_registry_json, FitError, ModelRegistry};
use protoperf::protocol::{parse_corpus, serialize_corpus, Protocol};
use protoperf::validator::{
    calibrate, default_bench_plan, run_validation, size_sweep_error, write_sweep_error_csv, SweepErrorConfig,
    ValidationError, DEFAULT_MIN_SEP_PCT,
};

const BACKENDS: [&str; 3] = ["synthetic", "synthetic-busywait", "rustcrypto"];

#[derive(Parser)]
#[command(name = "protoperf", version, about = "Cost models for cryptographic primitives and protocol performance estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep primitives through a backend and write per-repetition timings.
    Bench(BenchArgs),
    /// Fit one cubic per category from a measurement CSV into a registry.
    Fit(FitArgs),
    /// Print the estimated cost of every protocol in a file.
    Estimate(EstimateArgs),
    /// Estimate two protocols and print the verdict row.
    Compare(CompareArgs),
    /// Write a seeded random protocol corpus and its sidecar JSON.
    Generate(GenerateArgs),
    /// Compare estimated and measured orderings over every corpus pair.
    Validate(ValidateArgs),
    /// Mean ratio deviation as a function of payload size.
    SweepError(SweepErrorArgs),
    /// Calibrate, fit, generate and validate in one go.
    Replicate(ReplicateArgs),
}

#[derive(Args, Clone)]
struct TimingArgs {
    /// Repetitions per sweep point or protocol.
    #[arg(long, default_value_t = 32)]
    reps: u32,
    #[arg(long, default_value_t = 4)]
    warmup: u32,
    #[arg(long, default_value = "median")]
    aggregator: Aggregator,
    /// `auto`, `off`, or a fixed invocation count per window.
    #[arg(long, default_value = "auto", value_parser = parse_batching)]
    batching: Batching,
}

impl TimingArgs {
    fn config(&self, sizes: Option<Vec<usize>>) -> SweepConfig {
        let mut cfg = SweepConfig {
            repetitions: self.reps,
            warmup: self.warmup,
            aggregator: self.aggregator,
            batching: self.batching,
            ..SweepConfig::default()
        };
        if let Some(s) = sizes {
            cfg.sizes = s;
        }
        cfg
    }
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_parser = BACKENDS)]
    backend: String,
    /// CATEGORY:ALGORITHM[:MODE]:KEYBITS, e.g. senc:aes:cbc:128. Repeatable.
    #[arg(long = "spec", required = true)]
    specs: Vec<PrimitiveSpec>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the aggregated per-point CSV here.
    #[arg(long)]
    aggregated_out: Option<PathBuf>,
    /// Comma-separated payload sizes in bytes (default 16..16384, powers of two).
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[command(flatten)]
    timing: TimingArgs,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Registry JSON to write; existing entries for other categories are kept.
    #[arg(long)]
    out: PathBuf,
    /// Fit only these categories (keyword or registry key). Repeatable.
    #[arg(long = "category-op")]
    category_op: Vec<Category>,
    #[arg(long, default_value = "median")]
    aggregator: Aggregator,
}

#[derive(Args)]
struct EstimateArgs {
    /// Registry JSON path, or `builtin:table1` / `builtin:synthetic`.
    #[arg(long)]
    registry: String,
    #[arg(long)]
    protocols: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    registry: String,
    #[arg(long)]
    protocols: PathBuf,
    #[arg(long)]
    p: String,
    #[arg(long)]
    q: String,
    #[arg(long, default_value_t = DEFAULT_TIE_EPSILON)]
    tie_epsilon: f64,
}

#[derive(Args)]
struct GenArgs {
    /// Falls back to PROTOPERF_SEED.
    #[arg(long, env = "PROTOPERF_SEED")]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Generator config JSON; defaults apply when omitted.
    #[arg(long)]
    gen_config: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated payload sizes, overriding the config's choices.
    #[arg(long, value_delimiter = ',')]
    payloads: Option<Vec<u64>>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    registry: String,
    #[arg(long, value_parser = BACKENDS)]
    backend: String,
    /// Directory for report.csv and summary.json.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_SEP_PCT)]
    min_sep: f64,
    #[arg(long, default_value_t = DEFAULT_TIE_EPSILON)]
    tie_epsilon: f64,
    #[command(flatten)]
    timing: TimingArgs,
}

#[derive(Args)]
struct SweepErrorArgs {
    /// Comma-separated payload sizes in bytes.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<u64>,
    #[arg(long, value_parser = BACKENDS)]
    backend: String,
    /// Registry to estimate with. When omitted the backend is calibrated first.
    #[arg(long)]
    registry: Option<String>,
    #[command(flatten)]
    gen: GenArgs,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MIN_SEP_PCT)]
    min_sep: f64,
    #[arg(long, default_value_t = DEFAULT_TIE_EPSILON)]
    tie_epsilon: f64,
    #[command(flatten)]
    timing: TimingArgs,
}

#[derive(Args)]
struct ReplicateArgs {
    #[arg(long, value_parser = BACKENDS)]
    backend: String,
    #[command(flatten)]
    gen: GenArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_SEP_PCT)]
    min_sep: f64,
    #[command(flatten)]
    timing: TimingArgs,
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(e: impl Display) -> Failure {
    Failure { code: 2, message: e.to_string() }
}

fn internal(e: impl Display) -> Failure {
    Failure { code: 1, message: e.to_string() }
}

fn bench_failure(e: BenchError) -> Failure {
    match e {
        BenchError::Backend(BackendError::Crypto { .. } | BackendError::SelfTest { .. }) => internal(e),
        _ => usage(e),
    }
}

fn fit_failure(e: FitError) -> Failure {
    match e {
        FitError::NonFiniteResult => internal(e),
        _ => usage(e),
    }
}

fn validation_failure(e: ValidationError) -> Failure {
    match e {
        ValidationError::Bench(b) => bench_failure(b),
        ValidationError::Fit(f) => fit_failure(f),
        other => usage(other),
    }
}

fn parse_batching(s: &str) -> Result<Batching, String> {
    match s {
        "auto" => Ok(Batching::Auto),
        "off" => Ok(Batching::Off),
        n => match n.parse::<u64>() {
            Ok(k) if k > 0 => Ok(Batching::Fixed(k)),
            _ => Err(format!("expected auto, off or a positive count, got `{n}`")),
        },
    }
}

fn make_backend(name: &str) -> Box<dyn Backend> {
    match name {
        "synthetic" => Box::new(SyntheticBackend::deterministic()),
        "synthetic-busywait" => Box::new(SyntheticBackend::busy_wait(CostProfile::default())),
        "rustcrypto" => Box::new(RustCryptoBackend::default()),
        other => unreachable!("clap restricts backends, got {other}"),
    }
}

fn harness(name: &str) -> Result<Harness, Failure> {
    Harness::new(make_backend(name)).map_err(bench_failure)
}

fn load_registry(source: &str) -> Result<ModelRegistry, Failure> {
    match source {
        "builtin:table1" => Ok(ModelRegistry::table1()),
        "builtin:synthetic" => {
            let p = CostProfile::default();
            ModelRegistry::from_fn(|c| Some(p.model(c))).map_err(internal)
        }
        path => ModelRegistry::load(path).map_err(usage),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn make_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| usage(format!("cannot create {}: {e}", path.display())))
}

fn load_corpus(path: &Path) -> Result<Vec<Protocol>, Failure> {
    parse_corpus(&read_text(path)?).map_err(|e| usage(format!("{}:{e}", path.display())))
}

fn gen_config(args: &GenArgs) -> Result<GenConfig, Failure> {
    let cfg = match &args.gen_config {
        Some(path) => serde_json::from_str(&read_text(path)?)
            .map_err(|e| usage(format!("generator config {}: {e}", path.display())))?,
        None => GenConfig::default(),
    };
    Ok(cfg)
}

fn sidecar_path(corpus: &Path) -> PathBuf {
    let mut s = corpus.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_corpus(path: &Path, seed: u64, n: usize, cfg: &GenConfig) -> Result<Vec<Protocol>, Failure> {
    let corpus = generate_corpus(seed, n, cfg).map_err(usage)?;
    write_file(path, &serialize_corpus(&corpus))?;
    let sidecar = serde_json::to_string_pretty(&CorpusSidecar::new(seed, n, cfg)).map_err(internal)?;
    write_file(&sidecar_path(path), &(sidecar + "\n"))?;
    Ok(corpus)
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    let cfg = args.timing.config(args.sizes);
    cfg.validate().map_err(usage)?;
    let mut h = harness(&args.backend)?;
    let runs = h.sweep_all(&args.specs, &cfg).map_err(bench_failure)?;
    let rows: Vec<_> = runs.iter().flat_map(|r| r.rows()).collect();
    records::write_measurements(create(&args.out)?, &rows).map_err(usage)?;
    if let Some(path) = &args.aggregated_out {
        records::write_aggregated(create(path)?, &records::aggregate_rows(&rows, cfg.aggregator))
            .map_err(usage)?;
    }
    for r in &runs {
        if let Some(w) = r.points.iter().find_map(|p| p.timing.precision_warning.as_ref()) {
            eprintln!("warning: {}: {w}", r.spec);
        }
    }
    eprintln!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn fit(args: FitArgs) -> Result<(), Failure> {
    let rows = records::read_measurements(File::open(&args.input).map_err(|e| {
        usage(format!("cannot read {}: {e}", args.input.display()))
    })?)
    .map_err(usage)?;
    let datasets = records::class_datasets_from_rows(&records::aggregate_rows(&rows, args.aggregator))
        .map_err(usage)?;
    for c in &args.category_op {
        if !datasets.contains_key(c) {
            return Err(usage(format!("{} has no rows for category {c}", args.input.display())));
        }
    }
    let mut fitted = Vec::new();
    for (c, data) in datasets {
        if !args.category_op.is_empty() && !args.category_op.contains(&c) {
            continue;
        }
        let (model, stats) = fit_cubic(&data).map_err(|e| {
            let f = fit_failure(e);
            Failure { message: format!("{c}: {}", f.message), ..f }
        })?;
        println!("{c}: {stats}");
        fitted.push((c, model));
    }
    let existing = match fs::read_to_string(&args.out) {
        Ok(text) => Some(text),
        Err(e) if e.kind() == io::ErrorKind::NotFound => None,
        Err(e) => return Err(usage(format!("cannot read {}: {e}", args.out.display()))),
    };
    let merged = merge_registry_json(existing.as_deref(), &fitted).map_err(usage)?;
    let text = serde_json::to_string_pretty(&merged).map_err(internal)?;
    write_file(&args.out, &(text + "\n"))
}

fn estimate(args: EstimateArgs) -> Result<(), Failure> {
    let reg = load_registry(&args.registry)?;
    let corpus = load_corpus(&args.protocols)?;
    let mut out = io::stdout().lock();
    let unit = reg.unit().label();
    writeln!(out, "protocol_id,estimate,unit").map_err(internal)?;
    for p in &corpus {
        let e = estimate_protocol(p, &reg).map_err(|e| usage(format!("{}: {e}", p.id)))?;
        writeln!(out, "{},{e},{unit}", p.id).map_err(internal)?;
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<(), Failure> {
    let reg = load_registry(&args.registry)?;
    let corpus = load_corpus(&args.protocols)?;
    let find = |id: &str| {
        corpus
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| usage(format!("no protocol `{id}` in {}", args.protocols.display())))
    };
    let verdict = compare_protocols(find(&args.p)?, find(&args.q)?, &reg, args.tie_epsilon).map_err(usage)?;
    write_verdicts(io::stdout().lock(), &[verdict]).map_err(internal)
}

fn generate(args: GenerateArgs) -> Result<(), Failure> {
    let mut cfg = gen_config(&args.gen)?;
    if let Some(p) = args.payloads {
        cfg.payload_choices = p;
    }
    write_corpus(&args.out, args.gen.seed, args.gen.n, &cfg)?;
    eprintln!("wrote {} protocols to {}", args.gen.n, args.out.display());
    Ok(())
}

fn write_report(dir: &Path, report: &protoperf::validator::ValidationReport) -> Result<(), Failure> {
    make_dir(dir)?;
    report.write_csv(create(&dir.join("report.csv"))?).map_err(internal)?;
    let summary = serde_json::to_string_pretty(&report.summary_json()).map_err(internal)?;
    write_file(&dir.join("summary.json"), &(summary.clone() + "\n"))?;
    println!("{summary}");
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<(), Failure> {
    let reg = load_registry(&args.registry)?;
    let corpus = load_corpus(&args.corpus)?;
    let mut h = harness(&args.backend)?;
    let cfg = args.timing.config(None);
    let report = run_validation(&corpus, &reg, &mut h, &cfg, args.min_sep, args.tie_epsilon)
        .map_err(validation_failure)?;
    write_report(&args.report, &report)
}

fn sweep_error(args: SweepErrorArgs) -> Result<(), Failure> {
    let template = gen_config(&args.gen)?;
    let mut h = harness(&args.backend)?;
    let bench = args.timing.config(None);
    let reg = match &args.registry {
        Some(r) => load_registry(r)?,
        None => calibrate(&mut h, &default_bench_plan(&template), &bench).map_err(validation_failure)?.registry,
    };
    let cfg = SweepErrorConfig {
        seed: args.gen.seed,
        n: args.gen.n,
        template,
        bench,
        min_sep_pct: args.min_sep,
        tie_epsilon: args.tie_epsilon,
    };
    let points = size_sweep_error(&args.sizes, &cfg, &reg, &mut h).map_err(validation_failure)?;
    match &args.out {
        Some(path) => write_sweep_error_csv(create(path)?, &points),
        None => write_sweep_error_csv(io::stdout().lock(), &points),
    }
    .map_err(internal)
}

fn replicate(args: ReplicateArgs) -> Result<(), Failure> {
    let gen = gen_config(&args.gen)?;
    make_dir(&args.out)?;
    let mut h = harness(&args.backend)?;
    let cfg = args.timing.config(None);
    let cal = calibrate(&mut h, &default_bench_plan(&gen), &cfg).map_err(validation_failure)?;
    let rows: Vec<_> = cal.runs.iter().flat_map(|r| r.rows()).collect();
    records::write_measurements(create(&args.out.join("measurements.csv"))?, &rows).map_err(usage)?;
    for (c, s) in &cal.stats {
        eprintln!("{c}: {s}");
    }
    cal.registry.save(args.out.join("registry.json")).map_err(usage)?;
    let corpus = write_corpus(&args.out.join("corpus.txt"), args.gen.seed, args.gen.n, &gen)?;
    let report = run_validation(&corpus, &cal.registry, &mut h, &cfg, args.min_sep, DEFAULT_TIE_EPSILON)
        .map_err(validation_failure)?;
    write_report(&args.out, &report)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(a) => bench(a),
        Command::Fit(a) => fit(a),
        Command::Estimate(a) => estimate(a),
        Command::Compare(a) => compare(a),
        Command::Generate(a) => generate(a),
        Command::Validate(a) => validate(a),
        Command::SweepError(a) => sweep_error(a),
        Command::Replicate(a) => replicate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
