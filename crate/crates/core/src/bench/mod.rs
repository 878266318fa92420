//! Timing harness: runs primitives through a [`Backend`] over a size sweep
//! and turns the timings into [`MeasurementDataset`]s.

mod backend;
mod clock;
pub mod records;
mod rustcrypto;
mod spec;
mod synthetic;

use std::sync::{Arc, Mutex, PoisonError};
use std::time::Duration;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

pub use backend::{run_self_test, AlgorithmSupport, Backend, BackendError, Capabilities};
pub use clock::{clock_resolution, Clock, MonotonicClock, VirtualClock};
pub use rustcrypto::{RustCryptoBackend, DEFAULT_RSA_KEY_BITS};
pub use spec::{block_capacity, Aggregator, Batching, PrimitiveSpec, SpecError, SweepConfig};
pub use synthetic::{CostProfile, SyntheticBackend, SyntheticMode, SYNTHETIC_RSA_KEY_BITS};

use crate::category::Category;
use crate::model::{DatasetError, MeasurementDataset, Sample, TimeUnit};

/// A timing window must span at least this many clock ticks.
pub const BATCH_THRESHOLD_TICKS: u64 = 64;

/// Coarsest clock the harness accepts.
pub const MAX_CLOCK_RESOLUTION: Duration = Duration::from_millis(1);

/// Below this a single unbatched reading is flagged as imprecise.
pub const PRECISION_WARNING_NS: f64 = 1_000_000.0;

/// Held for the whole timed part of a run, so timed regions never overlap.
static TIMING_LOCK: Mutex<()> = Mutex::new(());

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("clock resolution {0:?} is coarser than the 1 ms floor")]
    ClockTooCoarse(Duration),
    #[error(
        "one invocation takes {per_call_ns:.0} ns, below the {threshold_ns} ns timing threshold, and batching is off"
    )]
    BelowResolution { per_call_ns: f64, threshold_ns: u64 },
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error("backend `{backend}` offers no key sizes for {spec}")]
    NoKeySizes { backend: String, spec: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Result of timing one unit of work.
#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    /// Per-invocation time of each repetition, in ns.
    pub samples_ns: Vec<f64>,
    /// Aggregate of `samples_ns` per the configured aggregator.
    pub elapsed_ns: f64,
    /// Inter-quartile range of `samples_ns`.
    pub dispersion_ns: f64,
    /// Invocations per timing window.
    pub batch: u64,
    pub precision_warning: Option<String>,
}

/// Owns one backend exclusively and times work against it.
pub struct Harness {
    backend: Box<dyn Backend>,
    clock: Arc<dyn Clock>,
    resolution: Duration,
}

impl Harness {
    /// Runs the backend self-test; timing never starts on a backend that fails it.
    pub fn new(mut backend: Box<dyn Backend>) -> Result<Self, BenchError> {
        run_self_test(backend.as_mut())?;
        let clock = backend.clock();
        let resolution = clock.resolution();
        if resolution > MAX_CLOCK_RESOLUTION {
            return Err(BenchError::ClockTooCoarse(resolution));
        }
        Ok(Harness { backend, clock, resolution })
    }

    pub fn backend(&self) -> &dyn Backend {
        self.backend.as_ref()
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    pub fn capabilities(&self) -> &Capabilities {
        self.backend.capabilities()
    }

    pub fn resolution(&self) -> Duration {
        self.resolution
    }

    pub fn threshold_ns(&self) -> u64 {
        BATCH_THRESHOLD_TICKS * self.resolution.as_nanos().max(1) as u64
    }

    /// The input `spec` is timed on: seeded random bytes of length `len`,
    /// already encrypted with the matching encrypt spec for decrypt categories.
    pub fn prepare(&mut self, spec: &PrimitiveSpec, len: usize) -> Result<Vec<u8>, BenchError> {
        self.backend.capabilities().check(spec)?;
        let mut payload = vec![0u8; len];
        ChaCha20Rng::seed_from_u64(payload_seed(spec, len)).fill_bytes(&mut payload);
        if spec.category.is_decrypt() {
            let enc = spec.with_category(spec.category.encrypt_counterpart());
            self.backend.capabilities().check_payload(&enc, len)?;
            Ok(self.backend.invoke(&enc, &payload)?)
        } else {
            self.backend.capabilities().check_payload(spec, len)?;
            Ok(payload)
        }
    }

    /// Times `work` (one unit = one call of the closure) per `cfg`.
    pub fn time_with(
        &mut self,
        cfg: &SweepConfig,
        mut work: impl FnMut(&mut dyn Backend) -> Result<(), BackendError>,
    ) -> Result<Timing, BenchError> {
        let mut t = self.time_interleaved(cfg, 1, |_, b| work(b))?;
        Ok(t.pop().expect("one unit"))
    }

    /// Times `units` independent pieces of work, `work(i, backend)` running
    /// one invocation of unit `i`. Each unit gets its own warmup and batch
    /// size; the repetitions then run round-robin across units, so a slow
    /// change in machine speed lands on every unit alike rather than on
    /// whichever happened to run last. With more than one unit, every timed
    /// window is preceded by one untimed invocation of the same unit, since
    /// the previous unit may have left caches and predictors cold.
    pub fn time_interleaved(
        &mut self,
        cfg: &SweepConfig,
        units: usize,
        mut work: impl FnMut(usize, &mut dyn Backend) -> Result<(), BackendError>,
    ) -> Result<Vec<Timing>, BenchError> {
        cfg.validate().map_err(BenchError::Config)?;
        let _guard = TIMING_LOCK.lock().unwrap_or_else(PoisonError::into_inner);
        let backend = self.backend.as_mut();
        let clock = self.clock.as_ref();
        let mut window = |i: usize, k: u64| -> Result<u64, BackendError> {
            let start = clock.now_ns();
            for _ in 0..k {
                work(i, &mut *backend)?;
            }
            Ok(clock.now_ns() - start)
        };

        let threshold = BATCH_THRESHOLD_TICKS * self.resolution.as_nanos().max(1) as u64;
        let mut batches = Vec::with_capacity(units);
        for i in 0..units {
            for _ in 0..cfg.warmup {
                window(i, 1)?;
            }
            batches.push(match cfg.batching {
                Batching::Fixed(k) => k,
                Batching::Off => {
                    let t = window(i, 1)?;
                    if t < threshold {
                        return Err(BenchError::BelowResolution { per_call_ns: t as f64, threshold_ns: threshold });
                    }
                    1
                }
                Batching::Auto => {
                    let mut k = 1u64;
                    let mut t = window(i, k)?;
                    while t < threshold {
                        k = k.saturating_mul(2);
                        t = window(i, k)?;
                    }
                    if k == 1 {
                        1
                    } else {
                        let per_call = t as f64 / k as f64;
                        ((threshold as f64 / per_call).ceil() as u64).clamp(1, k)
                    }
                }
            });
        }

        let mut samples = vec![Vec::with_capacity(cfg.repetitions as usize); units];
        for _ in 0..cfg.repetitions {
            for (i, s) in samples.iter_mut().enumerate() {
                if units > 1 {
                    window(i, 1)?;
                }
                s.push(window(i, batches[i])? as f64 / batches[i] as f64);
            }
        }
        Ok(samples
            .into_iter()
            .zip(batches)
            .map(|(samples, batch)| {
                let elapsed = aggregate(&samples, cfg.aggregator);
                let precision_warning = (batch == 1 && elapsed < PRECISION_WARNING_NS).then(|| {
                    format!(
                        "unbatched reading of {elapsed:.0} ns is below 1 ms; single-window timings at this scale are imprecise"
                    )
                });
                if let Some(w) = &precision_warning {
                    log::debug!("{w}");
                }
                Timing { dispersion_ns: iqr(&samples), samples_ns: samples, elapsed_ns: elapsed, batch, precision_warning }
            })
            .collect())
    }

    /// Times `spec` on a fixed seeded payload of `size` bytes.
    pub fn time_primitive(&mut self, spec: &PrimitiveSpec, size: usize, cfg: &SweepConfig) -> Result<Timing, BenchError> {
        let input = self.prepare(spec, size)?;
        self.time_with(cfg, |b| b.invoke(spec, &input).map(|out| drop(std::hint::black_box(out))))
    }

    /// One timing per sweep point. Symmetric and hash specs sweep `cfg.sizes`
    /// with x = payload bytes; asymmetric specs sweep the backend's key sizes
    /// with x = key bits and a payload at full block capacity.
    pub fn sweep(&mut self, spec: &PrimitiveSpec, cfg: &SweepConfig) -> Result<SweepRun, BenchError> {
        Ok(self.sweep_all(std::slice::from_ref(spec), cfg)?.pop().expect("one spec"))
    }

    /// [`Harness::sweep`] for several specs, with every point of every spec
    /// timed in one interleaved pass.
    pub fn sweep_all(&mut self, specs: &[PrimitiveSpec], cfg: &SweepConfig) -> Result<Vec<SweepRun>, BenchError> {
        cfg.validate().map_err(BenchError::Config)?;
        // (owning spec index, point spec, point skeleton, input)
        let mut plan = Vec::new();
        for (j, spec) in specs.iter().enumerate() {
            if spec.category.is_asymmetric() {
                self.backend.capabilities().check(spec)?;
                let keys = self.capabilities().key_sizes(spec.category, &spec.algorithm);
                let keys: Vec<u32> = keys.into_iter().filter(|&k| block_capacity(k).is_some()).collect();
                if keys.is_empty() {
                    return Err(BenchError::NoKeySizes { backend: self.backend_id().into(), spec: spec.to_string() });
                }
                for key_bits in keys {
                    let s = spec.with_key_bits(key_bits);
                    let size = block_capacity(key_bits).expect("filtered");
                    let input = self.prepare(&s, size)?;
                    plan.push((j, s, (key_bits as f64, key_bits, size), input));
                }
            } else {
                for &size in &cfg.sizes {
                    let input = self.prepare(spec, size)?;
                    plan.push((j, spec.clone(), (size as f64, spec.key_bits, size), input));
                }
            }
        }
        let timings = self.time_interleaved(cfg, plan.len(), |i, b| {
            let (_, spec, _, input) = &plan[i];
            b.invoke(spec, input).map(|out| drop(std::hint::black_box(out)))
        })?;
        let mut runs: Vec<SweepRun> = specs
            .iter()
            .map(|spec| SweepRun {
                spec: spec.clone(),
                backend: self.backend_id().to_string(),
                repetitions: cfg.repetitions,
                aggregator: cfg.aggregator,
                points: Vec::new(),
            })
            .collect();
        for ((j, _, (x, key_bits, size_bytes), _), timing) in plan.into_iter().zip(timings) {
            runs[j].points.push(SweepPoint { x, key_bits, size_bytes, timing });
        }
        Ok(runs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub x: f64,
    pub key_bits: u32,
    pub size_bytes: usize,
    pub timing: Timing,
}

/// All timings of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    /// The swept spec. For asymmetric sweeps the key size varies per point.
    pub spec: PrimitiveSpec,
    pub backend: String,
    pub repetitions: u32,
    pub aggregator: Aggregator,
    pub points: Vec<SweepPoint>,
}

impl SweepRun {
    /// One sample per sweep point, in ns.
    pub fn to_dataset(&self) -> Result<MeasurementDataset, BenchError> {
        let samples = self.points.iter().map(|p| Sample { x: p.x, y: p.timing.elapsed_ns }).collect();
        let mut d = MeasurementDataset::new(samples, TimeUnit::Ns)?
            .with_meta("backend", &self.backend)
            .with_meta("category", self.spec.category.key())
            .with_meta("algorithm", &self.spec.algorithm)
            .with_meta("repetitions", self.repetitions.to_string())
            .with_meta("aggregator", format!("{:?}", self.aggregator).to_lowercase());
        if let Some(m) = self.spec.mode {
            d = d.with_meta("mode", m.label());
        }
        if !self.spec.category.is_asymmetric() {
            d = d.with_meta("key_bits", self.spec.key_bits.to_string());
        }
        Ok(d)
    }

    /// One measurement row per repetition.
    pub fn rows(&self) -> Vec<records::MeasurementRow> {
        let mut out = Vec::new();
        for p in &self.points {
            let spec = self.spec.with_key_bits(p.key_bits);
            for (rep, &ns) in p.timing.samples_ns.iter().enumerate() {
                out.push(records::MeasurementRow::new(&spec, p.size_bytes, rep as u32, ns));
            }
        }
        out
    }
}

/// Mean or median of `samples`; 0 for an empty slice.
pub fn aggregate(samples: &[f64], aggregator: Aggregator) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    match aggregator {
        Aggregator::Mean => samples.iter().sum::<f64>() / samples.len() as f64,
        Aggregator::Median => quantile(samples, 0.5),
    }
}

/// Q3 − Q1 with linear interpolation between order statistics.
pub fn iqr(samples: &[f64]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    quantile(samples, 0.75) - quantile(samples, 0.25)
}

fn quantile(samples: &[f64], q: f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// FNV-1a over the spec text and size, so every (spec, size) gets its own
/// reproducible payload.
fn payload_seed(spec: &PrimitiveSpec, len: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in format!("{spec}/{len}").bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Pools sweeps of several algorithms per category into one class-level
/// dataset each. Categories with no sweep are absent.
pub fn class_datasets(runs: &[SweepRun]) -> Result<Vec<(Category, MeasurementDataset)>, BenchError> {
    let mut out = Vec::new();
    for c in Category::ALL {
        let parts: Vec<MeasurementDataset> = runs
            .iter()
            .filter(|r| r.spec.category == c)
            .map(SweepRun::to_dataset)
            .collect::<Result<_, _>>()?;
        if let Some(mut pooled) = MeasurementDataset::pooled(&parts) {
            let algs: Vec<String> = runs.iter().filter(|r| r.spec.category == c).map(|r| r.spec.to_string()).collect();
            pooled.meta.insert("pooled".into(), algs.join(" "));
            out.push((c, pooled));
        }
    }
    Ok(out)
}
