//! Cubic cost models and the least-squares fitter that produces them.
//!
//! A [`PolynomialModel`] maps an input size `x` (payload bytes for symmetric
//! and hash operations, key bits for asymmetric ones) to a cost
//! `α₄x³ + α₃x² + α₂x + α₁`. Coefficients are always stored constant-term
//! first: `coefficients[0] = α₁ … coefficients[3] = α₄`.

mod fit;
mod registry;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use fit::{fit_cubic, fit_cubic_points, FitError, PIVOT_RATIO_FLOOR};
pub use registry::{
    merge_registry_json, registry_load, registry_save, ModelRegistry, RegistryError, TABLE1_PRESET_JSON,
};

/// Time unit attached to a model or dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeUnit {
    #[serde(rename = "ns")]
    Ns,
    #[serde(rename = "us")]
    Us,
    #[serde(rename = "ms")]
    Ms,
    /// The unlabeled unit of the published reference coefficients. Never
    /// comparable with wall-clock measurements.
    #[serde(rename = "paper-units")]
    PaperUnits,
}

impl TimeUnit {
    pub fn label(self) -> &'static str {
        match self {
            TimeUnit::Ns => "ns",
            TimeUnit::Us => "us",
            TimeUnit::Ms => "ms",
            TimeUnit::PaperUnits => "paper-units",
        }
    }
}

impl fmt::Display for TimeUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown unit label `{0}` (expected ns, us, ms or paper-units)")]
pub struct UnknownUnit(pub String);

impl FromStr for TimeUnit {
    type Err = UnknownUnit;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ns" => Ok(TimeUnit::Ns),
            "us" => Ok(TimeUnit::Us),
            "ms" => Ok(TimeUnit::Ms),
            "paper-units" => Ok(TimeUnit::PaperUnits),
            other => Err(UnknownUnit(other.to_string())),
        }
    }
}

/// Where a fitted model came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitProvenance {
    /// Hex SHA-256 of the dataset samples (see [`MeasurementDataset::digest`]).
    pub digest: String,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("coefficient α{index} is not finite ({value})")]
    NonFiniteCoefficient { index: usize, value: f64 },
    #[error("model input must be a finite, non-negative size (got {0})")]
    InvalidInput(f64),
}

/// Cubic cost curve for one algorithm class.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialModel {
    coefficients: [f64; 4],
    unit: TimeUnit,
    fitted_on: Option<FitProvenance>,
}

impl PolynomialModel {
    /// `coefficients` are `[α₁, α₂, α₃, α₄]`.
    pub fn new(coefficients: [f64; 4], unit: TimeUnit) -> Result<Self, ModelError> {
        for (i, c) in coefficients.iter().enumerate() {
            if !c.is_finite() {
                return Err(ModelError::NonFiniteCoefficient { index: i + 1, value: *c });
            }
        }
        Ok(PolynomialModel { coefficients, unit, fitted_on: None })
    }

    pub fn with_provenance(mut self, provenance: FitProvenance) -> Self {
        self.fitted_on = Some(provenance);
        self
    }

    pub fn coefficients(&self) -> [f64; 4] {
        self.coefficients
    }

    pub fn alpha1(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn alpha2(&self) -> f64 {
        self.coefficients[1]
    }

    pub fn alpha3(&self) -> f64 {
        self.coefficients[2]
    }

    pub fn alpha4(&self) -> f64 {
        self.coefficients[3]
    }

    pub fn unit(&self) -> TimeUnit {
        self.unit
    }

    pub fn fitted_on(&self) -> Option<&FitProvenance> {
        self.fitted_on.as_ref()
    }

    /// Evaluates the cubic at `x`. No clamping: pathological coefficients
    /// may yield a negative cost.
    pub fn eval(&self, x: f64) -> Result<f64, ModelError> {
        if !x.is_finite() || x < 0.0 {
            return Err(ModelError::InvalidInput(x));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        let [a1, a2, a3, a4] = self.coefficients;
        a1 + x * (a2 + x * (a3 + x * a4))
    }

    /// `3α₄x² + 2α₃x + α₂`.
    pub fn derivative(&self, x: f64) -> f64 {
        let [_, a2, a3, a4] = self.coefficients;
        a2 + x * (2.0 * a3 + x * 3.0 * a4)
    }

    /// Every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, ModelError> {
        let c = self.coefficients.map(|a| a * factor);
        PolynomialModel::new(c, self.unit)
    }

    /// True when the derivative stays strictly positive on `[lo, hi]`.
    ///
    /// The derivative is a quadratic, so its minimum over the interval is at
    /// an endpoint or at the vertex `-α₃ / (3α₄)`.
    pub fn is_strictly_increasing_on(&self, lo: f64, hi: f64) -> bool {
        let [_, _, a3, a4] = self.coefficients;
        let mut candidates = vec![lo, hi];
        if a4 != 0.0 {
            let vertex = -a3 / (3.0 * a4);
            if vertex > lo && vertex < hi {
                candidates.push(vertex);
            }
        }
        candidates.into_iter().all(|x| self.derivative(x) > 0.0)
    }
}

/// Evaluates `model` at `x`.
pub fn eval_model(model: &PolynomialModel, x: f64) -> Result<f64, ModelError> {
    model.eval(x)
}

/// One `(input size, elapsed time)` observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("sample {index} is invalid: x={x}, y={y} (both must be finite and non-negative)")]
    InvalidSample { index: usize, x: f64, y: f64 },
}

/// Ordered measurement samples, the fitter's input.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementDataset {
    samples: Vec<Sample>,
    unit: TimeUnit,
    /// Free-form provenance: backend id, algorithm, mode, key bits, repetitions...
    pub meta: BTreeMap<String, String>,
}

impl MeasurementDataset {
    pub fn new(samples: Vec<Sample>, unit: TimeUnit) -> Result<Self, DatasetError> {
        for (index, s) in samples.iter().enumerate() {
            if !(s.x.is_finite() && s.y.is_finite() && s.x >= 0.0 && s.y >= 0.0) {
                return Err(DatasetError::InvalidSample { index, x: s.x, y: s.y });
            }
        }
        Ok(MeasurementDataset { samples, unit, meta: BTreeMap::new() })
    }

    pub fn from_pairs(pairs: &[(f64, f64)], unit: TimeUnit) -> Result<Self, DatasetError> {
        Self::new(pairs.iter().map(|&(x, y)| Sample { x, y }).collect(), unit)
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn unit(&self) -> TimeUnit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y).collect()
    }

    /// Concatenates datasets that share a unit. Used to pool every algorithm
    /// of a class into one class-level fit.
    pub fn pooled<'a>(
        parts: impl IntoIterator<Item = &'a MeasurementDataset>,
    ) -> Option<MeasurementDataset> {
        let mut iter = parts.into_iter();
        let first = iter.next()?.clone();
        let mut out = first;
        for d in iter {
            if d.unit != out.unit {
                return None;
            }
            out.samples.extend_from_slice(&d.samples);
        }
        Some(out)
    }

    /// SHA-256 over the `x,y` lines of the samples, in order.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for s in &self.samples {
            h.update(format!("{},{}\n", s.x, s.y).as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Fit quality against a dataset, in the dataset's unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub rmse: f64,
    pub max_abs_residual: f64,
    /// `100 × max_abs_residual / max y`. `None` when every measured value is
    /// zero, since the percentage has no scale then.
    pub percent_of_max: Option<f64>,
    /// Sum of `y − f(x)`; ~0 for a freshly fitted model.
    pub residual_sum: f64,
}

impl fmt::Display for FitStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rmse={} max_abs_residual={} percent_of_max=", self.rmse, self.max_abs_residual)?;
        match self.percent_of_max {
            Some(p) => write!(f, "{p}")?,
            None => f.write_str("n/a")?,
        }
        write!(f, " residual_sum={}", self.residual_sum)
    }
}

/// Residual statistics of `model` over `data`.
pub fn fit_error(model: &PolynomialModel, data: &MeasurementDataset) -> Result<FitStats, FitError> {
    if data.unit() != model.unit() {
        return Err(FitError::UnitMismatch { model: model.unit(), data: data.unit() });
    }
    stats_for_points(model, &data.xs(), &data.ys())
}

pub(crate) fn stats_for_points(
    model: &PolynomialModel,
    xs: &[f64],
    ys: &[f64],
) -> Result<FitStats, FitError> {
    if xs.is_empty() {
        return Err(FitError::EmptyDataset);
    }
    let mut sq = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut sum = 0.0;
    let mut max_y = f64::NEG_INFINITY;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - model.eval_unchecked(x);
        sq += r * r;
        sum += r;
        max_abs = max_abs.max(r.abs());
        max_y = max_y.max(y);
    }
    let percent_of_max = (max_y > 0.0).then(|| 100.0 * max_abs / max_y);
    Ok(FitStats {
        rmse: (sq / xs.len() as f64).sqrt(),
        max_abs_residual: max_abs,
        percent_of_max,
        residual_sum: sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(c: [f64; 4]) -> PolynomialModel {
        PolynomialModel::new(c, TimeUnit::Ns).unwrap()
    }

    #[test]
    fn identity_line() {
        assert_eq!(eval_model(&model([0.0, 1.0, 0.0, 0.0]), 7.0).unwrap(), 7.0);
    }

    #[test]
    fn constant_term_at_zero_is_exact() {
        let m = model([3.852945249, 0.01700037541, -2.754241881e-7, 1.522749902e-11]);
        assert_eq!(m.eval(0.0).unwrap(), 3.852945249);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = model([1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(m.eval(f64::NAN), Err(ModelError::InvalidInput(_))));
        assert!(matches!(m.eval(f64::INFINITY), Err(ModelError::InvalidInput(_))));
        assert!(matches!(m.eval(-1.0), Err(ModelError::InvalidInput(_))));
        assert!(matches!(
            PolynomialModel::new([1.0, f64::NAN, 0.0, 0.0], TimeUnit::Ns),
            Err(ModelError::NonFiniteCoefficient { index: 2, .. })
        ));
    }

    #[test]
    fn negative_values_are_not_clamped() {
        assert_eq!(model([-5.0, 0.0, 0.0, 0.0]).eval(3.0).unwrap(), -5.0);
    }

    #[test]
    fn fit_error_hand_arithmetic() {
        let m = model([5.0, 0.0, 0.0, 0.0]);
        let data = MeasurementDataset::from_pairs(&[(1.0, 6.0), (2.0, 4.0)], TimeUnit::Ns).unwrap();
        let s = fit_error(&m, &data).unwrap();
        assert_eq!(s.max_abs_residual, 1.0);
        assert!((s.percent_of_max.unwrap() - 100.0 / 6.0).abs() < 1e-12);
        assert_eq!(s.rmse, 1.0);
        assert_eq!(s.residual_sum, 0.0);
    }

    #[test]
    fn fit_error_edge_cases() {
        let m = model([0.0; 4]);
        let empty = MeasurementDataset::new(vec![], TimeUnit::Ns).unwrap();
        assert!(matches!(fit_error(&m, &empty), Err(FitError::EmptyDataset)));
        let zeros = MeasurementDataset::from_pairs(&[(1.0, 0.0), (2.0, 0.0)], TimeUnit::Ns).unwrap();
        assert_eq!(fit_error(&m, &zeros).unwrap().percent_of_max, None);
        let ms = MeasurementDataset::from_pairs(&[(1.0, 1.0)], TimeUnit::Ms).unwrap();
        assert!(matches!(fit_error(&m, &ms), Err(FitError::UnitMismatch { .. })));
    }

    #[test]
    fn dataset_rejects_negative_and_nan() {
        assert!(MeasurementDataset::from_pairs(&[(1.0, -1.0)], TimeUnit::Ns).is_err());
        assert!(MeasurementDataset::from_pairs(&[(f64::NAN, 1.0)], TimeUnit::Ns).is_err());
    }

    #[test]
    fn unit_labels() {
        for u in [TimeUnit::Ns, TimeUnit::Us, TimeUnit::Ms, TimeUnit::PaperUnits] {
            assert_eq!(u.label().parse::<TimeUnit>().unwrap(), u);
        }
        assert!("seconds".parse::<TimeUnit>().is_err());
    }

    #[test]
    fn monotonicity_check_sees_the_vertex() {
        // derivative 3x² − 6x + 3.5 has its minimum 0.5 at x = 1
        let up = model([0.0, 3.5, -3.0, 1.0]);
        assert!(up.is_strictly_increasing_on(0.0, 10.0));
        // derivative 3x² − 6x + 2 dips below zero near x = 1
        let dip = model([0.0, 2.0, -3.0, 1.0]);
        assert!(!dip.is_strictly_increasing_on(0.0, 10.0));
        assert!(dip.is_strictly_increasing_on(2.0, 10.0));
    }
}
