//! Protocol cost estimates from class-level models, pairwise comparison, and
//! the measured counterpart through a backend.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bench::{BenchError, Harness, PrimitiveSpec, SweepConfig, Timing};
use crate::model::{ModelError, ModelRegistry};
use crate::protocol::{CryptoOp, Protocol};

/// Relative separation below which two estimates are a tie.
pub const DEFAULT_TIE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimateError {
    #[error("operation {0} has an empty payload")]
    EmptyPayload(String),
    #[error("operation {op}: a {key_bits}-bit key cannot hold one padded byte (needs key_bits/8 - 11 >= 1)")]
    KeyTooSmall { op: String, key_bits: u32 },
    #[error("tie epsilon must be finite and non-negative, got {0}")]
    BadEpsilon(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Symmetric and hash ops: `f(payload)`. Asymmetric ops: `f(key_bits)` per
/// block, times `ceil(payload / (key_bits/8 − 11))` blocks.
pub fn estimate_op(op: &CryptoOp, reg: &ModelRegistry) -> Result<f64, EstimateError> {
    if op.payload_bytes == 0 {
        return Err(EstimateError::EmptyPayload(op.to_string()));
    }
    let model = reg.get(op.category);
    if op.category.is_asymmetric() {
        let blocks = op
            .invocations()
            .ok_or_else(|| EstimateError::KeyTooSmall { op: op.to_string(), key_bits: op.key_bits })?;
        Ok(model.eval(op.key_bits as f64)? * blocks as f64)
    } else {
        Ok(model.eval(op.payload_bytes as f64)?)
    }
}

/// Sum over every op of every step, in registry units.
pub fn estimate_protocol(p: &Protocol, reg: &ModelRegistry) -> Result<f64, EstimateError> {
    p.ops().map(|op| estimate_op(op, reg)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Faster {
    P,
    Q,
    #[serde(rename = "TIE")]
    Tie,
}

impl Faster {
    pub fn flipped(self) -> Faster {
        match self {
            Faster::P => Faster::Q,
            Faster::Q => Faster::P,
            Faster::Tie => Faster::Tie,
        }
    }

    /// The cheaper side, or a tie when the relative separation is ≤ `eps`.
    pub fn of(p: f64, q: f64, eps: f64) -> Faster {
        let scale = p.abs().max(q.abs());
        if (p - q).abs() <= eps * scale {
            Faster::Tie
        } else if p < q {
            Faster::P
        } else {
            Faster::Q
        }
    }
}

impl fmt::Display for Faster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Faster::P => "P",
            Faster::Q => "Q",
            Faster::Tie => "TIE",
        })
    }
}

/// Estimated (and optionally measured) comparison of protocols P and Q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonVerdict {
    pub p_id: String,
    pub q_id: String,
    pub est_p: f64,
    pub est_q: f64,
    /// `est_p / est_q`; `None` when `est_q` is 0.
    pub est_ratio: Option<f64>,
    pub predicted_faster: Faster,
    pub meas_p: Option<f64>,
    pub meas_q: Option<f64>,
    pub meas_ratio: Option<f64>,
    /// Whether the prediction matches the measured ordering. Present iff
    /// measurements are.
    pub agree: Option<bool>,
}

impl ComparisonVerdict {
    pub fn from_estimates(p_id: &str, q_id: &str, est_p: f64, est_q: f64, tie_epsilon: f64) -> Self {
        ComparisonVerdict {
            p_id: p_id.to_string(),
            q_id: q_id.to_string(),
            est_p,
            est_q,
            est_ratio: (est_q != 0.0).then(|| est_p / est_q),
            predicted_faster: Faster::of(est_p, est_q, tie_epsilon),
            meas_p: None,
            meas_q: None,
            meas_ratio: None,
            agree: None,
        }
    }

    /// Adds measured costs. The measured ordering is strict: equal
    /// measurements order as a tie.
    pub fn with_measurements(mut self, meas_p: f64, meas_q: f64) -> Self {
        self.meas_p = Some(meas_p);
        self.meas_q = Some(meas_q);
        self.meas_ratio = (meas_q != 0.0).then(|| meas_p / meas_q);
        self.agree = Some(self.predicted_faster == Faster::of(meas_p, meas_q, 0.0));
        self
    }

    /// `|meas_p − meas_q| / min(meas_p, meas_q)` in percent.
    pub fn measured_separation_pct(&self) -> Option<f64> {
        let (p, q) = (self.meas_p?, self.meas_q?);
        let lo = p.min(q);
        Some(if lo > 0.0 { (p - q).abs() / lo * 100.0 } else if p == q { 0.0 } else { f64::INFINITY })
    }

    /// `100 × |est_ratio − meas_ratio| / meas_ratio`.
    pub fn ratio_deviation_pct(&self) -> Option<f64> {
        let (e, m) = (self.est_ratio?, self.meas_ratio?);
        (m != 0.0).then(|| 100.0 * (e - m).abs() / m)
    }

    pub fn csv_row(&self) -> VerdictRow {
        VerdictRow {
            p_id: self.p_id.clone(),
            q_id: self.q_id.clone(),
            est_p: self.est_p,
            est_q: self.est_q,
            est_ratio: self.est_ratio,
            predicted_faster: self.predicted_faster.to_string(),
            meas_p_ns: self.meas_p,
            meas_q_ns: self.meas_q,
            meas_ratio: self.meas_ratio,
            agree: self.agree,
        }
    }
}

/// CSV shape of a verdict; measurement columns are empty when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub p_id: String,
    pub q_id: String,
    pub est_p: f64,
    pub est_q: f64,
    pub est_ratio: Option<f64>,
    pub predicted_faster: String,
    pub meas_p_ns: Option<f64>,
    pub meas_q_ns: Option<f64>,
    pub meas_ratio: Option<f64>,
    pub agree: Option<bool>,
}

pub const VERDICT_HEADER: [&str; 10] =
    ["p_id", "q_id", "est_p", "est_q", "est_ratio", "predicted_faster", "meas_p_ns", "meas_q_ns", "meas_ratio", "agree"];

pub fn write_verdicts<W: Write>(out: W, verdicts: &[ComparisonVerdict]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    if verdicts.is_empty() {
        w.write_record(VERDICT_HEADER)?;
    }
    for v in verdicts {
        w.serialize(v.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

/// Estimates both protocols and orders them. `est_ratio` is `est_p/est_q`.
pub fn compare_protocols(
    p: &Protocol,
    q: &Protocol,
    reg: &ModelRegistry,
    tie_epsilon: f64,
) -> Result<ComparisonVerdict, EstimateError> {
    if !(tie_epsilon.is_finite() && tie_epsilon >= 0.0) {
        return Err(EstimateError::BadEpsilon(tie_epsilon));
    }
    let est_p = estimate_protocol(p, reg)?;
    let est_q = estimate_protocol(q, reg)?;
    Ok(ComparisonVerdict::from_estimates(&p.id, &q.id, est_p, est_q, tie_epsilon))
}

/// The backend work one protocol run consists of: each op's spec and input,
/// with asymmetric payloads split into capacity-sized blocks.
pub fn protocol_workload(p: &Protocol, harness: &mut Harness) -> Result<Vec<(PrimitiveSpec, Vec<u8>)>, BenchError> {
    let mut work = Vec::new();
    for op in p.ops() {
        let spec = op.spec();
        let total = op.payload_bytes as usize;
        match spec.block_capacity() {
            Some(cap) => {
                let mut left = total;
                while left > 0 {
                    let chunk = left.min(cap);
                    work.push((spec.clone(), harness.prepare(&spec, chunk)?));
                    left -= chunk;
                }
            }
            None if spec.category.is_asymmetric() => {
                // Let the backend report the unusable key size.
                harness.prepare(&spec, total)?;
            }
            None => work.push((spec.clone(), harness.prepare(&spec, total)?)),
        }
    }
    Ok(work)
}

/// Runs every op of `p` in step order inside one timed region per
/// repetition. The result is in ns.
pub fn measure_protocol(p: &Protocol, harness: &mut Harness, cfg: &SweepConfig) -> Result<Timing, BenchError> {
    Ok(measure_protocols(std::slice::from_ref(p), harness, cfg)?.pop().expect("one protocol"))
}

/// [`measure_protocol`] for a whole corpus, repetitions interleaved across
/// protocols so that measured ratios compare like with like.
pub fn measure_protocols(
    corpus: &[Protocol],
    harness: &mut Harness,
    cfg: &SweepConfig,
) -> Result<Vec<Timing>, BenchError> {
    let work = corpus.iter().map(|p| protocol_workload(p, harness)).collect::<Result<Vec<_>, _>>()?;
    harness.time_interleaved(cfg, work.len(), |i, b| {
        for (spec, input) in &work[i] {
            std::hint::black_box(b.invoke(spec, input)?);
        }
        Ok(())
    })
}
