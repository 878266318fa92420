//! Estimated-versus-measured validation over protocol corpora.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{class_datasets, BenchError, Harness, PrimitiveSpec, SweepConfig, SweepRun, Timing};
use crate::category::{Category, Mode};
use crate::estimator::{estimate_protocol, measure_protocols, ComparisonVerdict, EstimateError, Faster};
use crate::generator::{generate_corpus, ordered_pair_indices, GenConfig, GenError};
use crate::model::{fit_cubic, FitError, FitStats, ModelRegistry, PolynomialModel, RegistryError, TimeUnit};
use crate::protocol::Protocol;

pub const DEFAULT_MIN_SEP_PCT: f64 = 5.0;

#[derive(Debug, thiserror::Error)]
pub enum ValidationError {
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Generate(#[from] GenError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("registry unit is {0}; validation compares against ns measurements")]
    UnitMismatch(TimeUnit),
    #[error("min_sep_pct must be finite and non-negative, got {0}")]
    BadMinSep(f64),
    #[error("no pairs left after filtering with min_sep_pct = {0}")]
    NothingRetained(f64),
    #[error("bench plan has no spec for {0}")]
    MissingCategory(Category),
    #[error("sweep-error needs at least one payload size")]
    NoSizes,
}

/// Where and how the measurements were taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub backend: String,
    pub os: String,
    pub arch: String,
    pub cpus: usize,
    pub clock_resolution_ns: u64,
    pub repetitions: u32,
    pub warmup: u32,
    pub aggregator: String,
    pub tool_version: String,
}

impl Environment {
    pub fn capture(harness: &Harness, cfg: &SweepConfig) -> Self {
        Environment {
            backend: harness.backend_id().to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            clock_resolution_ns: harness.resolution().as_nanos() as u64,
            repetitions: cfg.repetitions,
            warmup: cfg.warmup,
            aggregator: format!("{:?}", cfg.aggregator).to_lowercase(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Agreement and deviation over the retained pairs of a record set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Share of retained, non-TIE predictions matching the measured order.
    /// 1.0 when every retained prediction is a TIE.
    pub agreement_rate: f64,
    pub mean_abs_ratio_deviation_pct: f64,
    pub pairs_total: usize,
    pub pairs_retained: usize,
    pub min_sep_pct: f64,
}

/// A pair is kept when its measured costs differ by at least `min_sep_pct`.
pub fn is_retained(v: &ComparisonVerdict, min_sep_pct: f64) -> bool {
    v.measured_separation_pct().is_some_and(|s| s >= min_sep_pct)
}

/// `None` when no pair survives the filter.
pub fn summarize(records: &[ComparisonVerdict], min_sep_pct: f64) -> Option<Summary> {
    let (mut retained, mut decided, mut agreed) = (0usize, 0usize, 0usize);
    let (mut dev_sum, mut dev_n) = (0.0, 0usize);
    for v in records.iter().filter(|v| is_retained(v, min_sep_pct)) {
        retained += 1;
        if v.predicted_faster != Faster::Tie {
            decided += 1;
            agreed += usize::from(v.agree == Some(true));
        }
        if let Some(d) = v.ratio_deviation_pct() {
            dev_sum += d;
            dev_n += 1;
        }
    }
    (retained > 0).then(|| Summary {
        agreement_rate: if decided == 0 { 1.0 } else { agreed as f64 / decided as f64 },
        mean_abs_ratio_deviation_pct: if dev_n == 0 { 0.0 } else { dev_sum / dev_n as f64 },
        pairs_total: records.len(),
        pairs_retained: retained,
        min_sep_pct,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Every ordered pair, with measurements, in `(p_id, q_id)` order.
    pub pair_records: Vec<ComparisonVerdict>,
    pub agreement_rate: f64,
    pub mean_abs_ratio_deviation_pct: f64,
    pub pairs_total: usize,
    pub pairs_retained: usize,
    pub min_sep_pct: f64,
    pub environment: Environment,
    /// Measured ns per protocol id.
    pub measured_ns: BTreeMap<String, f64>,
    pub estimated: BTreeMap<String, f64>,
}

impl ValidationReport {
    pub fn retained(&self) -> impl Iterator<Item = &ComparisonVerdict> {
        self.pair_records.iter().filter(|v| is_retained(v, self.min_sep_pct))
    }

    /// Statistics of the same raw records under another filter.
    pub fn summary_at(&self, min_sep_pct: f64) -> Option<Summary> {
        summarize(&self.pair_records, min_sep_pct)
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "agreement_rate": self.agreement_rate,
            "mean_abs_ratio_deviation_pct": self.mean_abs_ratio_deviation_pct,
            "pairs_total": self.pairs_total,
            "pairs_retained": self.pairs_retained,
            "min_sep_pct": self.min_sep_pct,
            "environment": self.environment,
        })
    }

    /// Verdict CSV of the retained pairs.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let kept: Vec<ComparisonVerdict> = self.retained().cloned().collect();
        crate::estimator::write_verdicts(out, &kept)
    }
}

fn check_inputs(reg: &ModelRegistry, min_sep_pct: f64) -> Result<(), ValidationError> {
    if !(min_sep_pct.is_finite() && min_sep_pct >= 0.0) {
        return Err(ValidationError::BadMinSep(min_sep_pct));
    }
    if reg.unit() != TimeUnit::Ns {
        return Err(ValidationError::UnitMismatch(reg.unit()));
    }
    Ok(())
}

/// Measures each protocol once, then compares every ordered pair.
pub fn run_validation(
    corpus: &[Protocol],
    reg: &ModelRegistry,
    harness: &mut Harness,
    cfg: &SweepConfig,
    min_sep_pct: f64,
    tie_epsilon: f64,
) -> Result<ValidationReport, ValidationError> {
    check_inputs(reg, min_sep_pct)?;
    ordered_pair_indices(corpus)?;
    let measured = measure_protocols(corpus, harness, cfg)?;
    let env = Environment::capture(harness, cfg);
    report(corpus, reg, &measured, min_sep_pct, tie_epsilon, env)
}

fn report(
    corpus: &[Protocol],
    reg: &ModelRegistry,
    timings: &[Timing],
    min_sep_pct: f64,
    tie_epsilon: f64,
    environment: Environment,
) -> Result<ValidationReport, ValidationError> {
    let pairs = ordered_pair_indices(corpus)?;
    let estimates: Vec<f64> = corpus.iter().map(|p| estimate_protocol(p, reg)).collect::<Result<_, _>>()?;
    let measured: Vec<f64> = timings.iter().map(|t| t.elapsed_ns).collect();
    for (p, t) in corpus.iter().zip(timings) {
        log::debug!("measured {} = {:.0} ns (batch {})", p.id, t.elapsed_ns, t.batch);
    }
    let records: Vec<ComparisonVerdict> = pairs
        .par_iter()
        .map(|&(i, j)| {
            ComparisonVerdict::from_estimates(&corpus[i].id, &corpus[j].id, estimates[i], estimates[j], tie_epsilon)
                .with_measurements(measured[i], measured[j])
        })
        .collect();
    let summary = summarize(&records, min_sep_pct).ok_or(ValidationError::NothingRetained(min_sep_pct))?;
    Ok(ValidationReport {
        pair_records: records,
        agreement_rate: summary.agreement_rate,
        mean_abs_ratio_deviation_pct: summary.mean_abs_ratio_deviation_pct,
        pairs_total: summary.pairs_total,
        pairs_retained: summary.pairs_retained,
        min_sep_pct,
        environment,
        measured_ns: corpus.iter().zip(&measured).map(|(p, &m)| (p.id.clone(), m)).collect(),
        estimated: corpus.iter().zip(&estimates).map(|(p, &e)| (p.id.clone(), e)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepErrorPoint {
    pub payload_bytes: u64,
    pub mean_abs_ratio_deviation_pct: f64,
    pub agreement_rate: f64,
    pub pairs_retained: usize,
}

/// Corpus generation and validation settings shared by every size.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepErrorConfig {
    pub seed: u64,
    pub n: usize,
    pub template: GenConfig,
    pub bench: SweepConfig,
    pub min_sep_pct: f64,
    pub tie_epsilon: f64,
}

/// Regenerates the corpus with `payload_choices = {size}` for every size
/// and records the mean ratio deviation of each. All corpora are measured in
/// one interleaved pass, so no size is favoured by when it happened to run.
pub fn size_sweep_error(
    sizes: &[u64],
    cfg: &SweepErrorConfig,
    reg: &ModelRegistry,
    harness: &mut Harness,
) -> Result<Vec<SweepErrorPoint>, ValidationError> {
    if sizes.is_empty() {
        return Err(ValidationError::NoSizes);
    }
    check_inputs(reg, cfg.min_sep_pct)?;
    let corpora = sizes
        .iter()
        .map(|&size| generate_corpus(cfg.seed, cfg.n, &GenConfig { payload_choices: vec![size], ..cfg.template.clone() }))
        .collect::<Result<Vec<_>, _>>()?;
    ordered_pair_indices(&corpora[0])?;
    let all: Vec<Protocol> = corpora.concat();
    let timings = measure_protocols(&all, harness, &cfg.bench)?;
    let mut out = Vec::with_capacity(sizes.len());
    for ((&size, corpus), timings) in sizes.iter().zip(&corpora).zip(timings.chunks(cfg.n)) {
        let env = Environment::capture(harness, &cfg.bench);
        let report = report(corpus, reg, timings, cfg.min_sep_pct, cfg.tie_epsilon, env)?;
        log::info!(
            "sweep-error size={size}: deviation {:.3}% agreement {:.3} ({} pairs kept)",
            report.mean_abs_ratio_deviation_pct,
            report.agreement_rate,
            report.pairs_retained
        );
        out.push(SweepErrorPoint {
            payload_bytes: size,
            mean_abs_ratio_deviation_pct: report.mean_abs_ratio_deviation_pct,
            agreement_rate: report.agreement_rate,
            pairs_retained: report.pairs_retained,
        });
    }
    Ok(out)
}

/// `payload_bytes,mean_abs_ratio_deviation_pct`, LF-terminated.
pub fn write_sweep_error_csv<W: Write>(out: W, points: &[SweepErrorPoint]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["payload_bytes", "mean_abs_ratio_deviation_pct"])?;
    for p in points {
        w.write_record([p.payload_bytes.to_string(), p.mean_abs_ratio_deviation_pct.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// The specs to sweep so every op a corpus from `gen` can contain has a
/// class model: AES-CBC at each symmetric key size, SHA-1 and RSA.
pub fn default_bench_plan(gen: &GenConfig) -> Vec<PrimitiveSpec> {
    let mut plan = Vec::new();
    for c in [Category::SymmetricEncrypt, Category::SymmetricDecrypt] {
        for &k in &gen.symmetric_keys {
            plan.push(PrimitiveSpec::symmetric(c, "aes", Mode::Cbc, k));
        }
    }
    plan.push(PrimitiveSpec::hash("sha1"));
    let rsa_key = gen.asymmetric_keys.first().copied().unwrap_or(1024);
    plan.push(PrimitiveSpec::asymmetric(Category::AsymmetricEncrypt, "rsa", rsa_key));
    plan.push(PrimitiveSpec::asymmetric(Category::AsymmetricDecrypt, "rsa", rsa_key));
    plan
}

/// Registry fitted from fresh sweeps.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub registry: ModelRegistry,
    pub stats: Vec<(Category, FitStats)>,
    pub runs: Vec<SweepRun>,
}

/// Sweeps every spec of `plan` and fits one class-level cubic per category,
/// pooling the sweeps of all algorithms in that category.
pub fn calibrate(harness: &mut Harness, plan: &[PrimitiveSpec], cfg: &SweepConfig) -> Result<Calibration, ValidationError> {
    for c in Category::ALL {
        if !plan.iter().any(|s| s.category == c) {
            return Err(ValidationError::MissingCategory(c));
        }
    }
    log::info!("sweeping {} specs", plan.len());
    let runs = harness.sweep_all(plan, cfg)?;
    let mut models: BTreeMap<Category, PolynomialModel> = BTreeMap::new();
    let mut stats = Vec::new();
    for (c, data) in class_datasets(&runs)? {
        let (model, s) = fit_cubic(&data)?;
        log::info!("{c}: {s}");
        models.insert(c, model);
        stats.push((c, s));
    }
    let registry = ModelRegistry::from_fn(|c| models.get(&c).cloned())?;
    Ok(Calibration { registry, stats, runs })
}
