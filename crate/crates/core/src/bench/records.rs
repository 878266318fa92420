//! CSV forms of measurements.
//!
//! Per-repetition rows: `category,operation,algorithm,mode,key_bits,size_bytes,rep,elapsed_ns`.
//! Aggregated rows: `category,operation,x,elapsed_ns`. Both LF-terminated.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::spec::{block_capacity, Aggregator};
use super::{aggregate, PrimitiveSpec};
use crate::category::Category;
use crate::model::{MeasurementDataset, Sample, TimeUnit};

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {reason}")]
    Invalid { row: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub category: String,
    pub operation: String,
    pub algorithm: String,
    /// Empty for hash and asymmetric rows.
    pub mode: String,
    pub key_bits: u32,
    pub size_bytes: usize,
    pub rep: u32,
    pub elapsed_ns: f64,
}

impl MeasurementRow {
    pub fn new(spec: &PrimitiveSpec, size_bytes: usize, rep: u32, elapsed_ns: f64) -> Self {
        MeasurementRow {
            category: spec.category.family().to_string(),
            operation: spec.category.operation().to_string(),
            algorithm: spec.algorithm.clone(),
            mode: spec.mode.map(|m| m.label().to_string()).unwrap_or_default(),
            key_bits: spec.key_bits,
            size_bytes,
            rep,
            elapsed_ns,
        }
    }

    pub fn category(&self) -> Option<Category> {
        Category::from_parts(&self.category, &self.operation)
    }

    /// The model's x for this row: key bits for asymmetric rows, payload bytes otherwise.
    pub fn x(&self) -> Option<f64> {
        let c = self.category()?;
        Some(if c.is_asymmetric() { self.key_bits as f64 } else { self.size_bytes as f64 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedRow {
    pub category: String,
    pub operation: String,
    pub x: f64,
    pub elapsed_ns: f64,
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

pub fn write_measurements<W: Write>(out: W, rows: &[MeasurementRow]) -> Result<(), RecordError> {
    let mut w = writer(out);
    if rows.is_empty() {
        w.write_record(["category", "operation", "algorithm", "mode", "key_bits", "size_bytes", "rep", "elapsed_ns"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregated<W: Write>(out: W, rows: &[AggregatedRow]) -> Result<(), RecordError> {
    let mut w = writer(out);
    if rows.is_empty() {
        w.write_record(["category", "operation", "x", "elapsed_ns"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads and validates measurement rows.
pub fn read_measurements<R: Read>(input: R) -> Result<Vec<MeasurementRow>, RecordError> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize::<MeasurementRow>().enumerate() {
        let row = rec?;
        let invalid = |reason: String| RecordError::Invalid { row: i + 1, reason };
        let Some(c) = row.category() else {
            return Err(invalid(format!("unknown category/operation `{}.{}`", row.category, row.operation)));
        };
        if !(row.elapsed_ns.is_finite() && row.elapsed_ns >= 0.0) {
            return Err(invalid(format!("elapsed_ns {} is not a finite non-negative number", row.elapsed_ns)));
        }
        if c.is_symmetric() != !row.mode.is_empty() {
            return Err(invalid(format!("mode `{}` inconsistent with {c}", row.mode)));
        }
        if c.is_asymmetric() && block_capacity(row.key_bits).is_none() {
            return Err(invalid(format!("key_bits {} too small for {c}", row.key_bits)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Aggregates repetitions per sweep point (category, algorithm, mode, key,
/// x) and returns the points in input order.
pub fn aggregate_rows(rows: &[MeasurementRow], aggregator: Aggregator) -> Vec<AggregatedRow> {
    type Key = (String, String, String, String, u32, u64);
    let mut order: Vec<Key> = Vec::new();
    let mut groups: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    for r in rows {
        let Some(x) = r.x() else { continue };
        let key = (r.category.clone(), r.operation.clone(), r.algorithm.clone(), r.mode.clone(), r.key_bits, x.to_bits());
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r.elapsed_ns);
    }
    order
        .into_iter()
        .map(|k| AggregatedRow {
            elapsed_ns: aggregate(&groups[&k], aggregator),
            x: f64::from_bits(k.5),
            category: k.0,
            operation: k.1,
        })
        .collect()
}

/// One pooled ns dataset per category present in `rows`.
pub fn class_datasets_from_rows(
    rows: &[AggregatedRow],
) -> Result<BTreeMap<Category, MeasurementDataset>, RecordError> {
    let mut samples: BTreeMap<Category, Vec<Sample>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let c = Category::from_parts(&r.category, &r.operation).ok_or_else(|| RecordError::Invalid {
            row: i + 1,
            reason: format!("unknown category/operation `{}.{}`", r.category, r.operation),
        })?;
        samples.entry(c).or_default().push(Sample { x: r.x, y: r.elapsed_ns });
    }
    samples
        .into_iter()
        .enumerate()
        .map(|(i, (c, s))| {
            MeasurementDataset::new(s, TimeUnit::Ns)
                .map(|d| (c, d.with_meta("category", c.key())))
                .map_err(|e| RecordError::Invalid { row: i + 1, reason: e.to_string() })
        })
        .collect()
}
