//! The five class-level models, keyed by category, and their JSON file format.
//!
//! ```json
//! { "symmetric.encrypt": { "coefficients": [α₁, α₂, α₃, α₄], "unit": "ns",
//!                          "fitted_on": { "digest": "…", "samples": 11 } },
//!   "symmetric.decrypt": { … }, "hash.digest": { … },
//!   "asymmetric.encrypt": { … }, "asymmetric.decrypt": { … } }
//! ```
//!
//! Coefficient arrays are constant term FIRST, i.e. the reverse of the usual
//! "highest power first" table layout.

use std::path::Path;

use serde_json::{Map, Value};

use super::{FitProvenance, ModelError, PolynomialModel, TimeUnit};
use crate::category::Category;

/// Bundled reference coefficients (unit label `paper-units`).
pub const TABLE1_PRESET_JSON: &str = include_str!("../../presets/table1.json");

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("registry is missing the `{0}` entry")]
    MissingKey(&'static str),
    #[error("registry entry `{key}`: {reason}")]
    Malformed { key: String, reason: String },
    #[error("registry entry `{key}` has unknown unit label `{label}`")]
    UnknownUnit { key: String, label: String },
    #[error("registry mixes units: `{key}` is {found}, expected {expected}")]
    MixedUnits { key: &'static str, found: TimeUnit, expected: TimeUnit },
    #[error("registry is not a JSON object: {0}")]
    Json(#[from] serde_json::Error),
    #[error("registry file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Exactly one model per [`Category`], all in the same unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRegistry {
    models: [PolynomialModel; 5],
}

impl ModelRegistry {
    /// `models` are in [`Category::ALL`] order.
    pub fn new(models: [PolynomialModel; 5]) -> Result<Self, RegistryError> {
        let expected = models[0].unit();
        for (c, m) in Category::ALL.iter().zip(&models) {
            if m.unit() != expected {
                return Err(RegistryError::MixedUnits { key: c.key(), found: m.unit(), expected });
            }
        }
        Ok(ModelRegistry { models })
    }

    pub fn from_fn(
        mut f: impl FnMut(Category) -> Option<PolynomialModel>,
    ) -> Result<Self, RegistryError> {
        let mut out = Vec::with_capacity(5);
        for c in Category::ALL {
            out.push(f(c).ok_or(RegistryError::MissingKey(c.key()))?);
        }
        let models: [PolynomialModel; 5] = out.try_into().expect("five categories");
        Self::new(models)
    }

    /// The bundled reference coefficients.
    pub fn table1() -> Self {
        Self::from_json_str(TABLE1_PRESET_JSON).expect("bundled preset is valid")
    }

    pub fn get(&self, category: Category) -> &PolynomialModel {
        &self.models[category.index()]
    }

    pub fn unit(&self) -> TimeUnit {
        self.models[0].unit()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Category, &PolynomialModel)> {
        Category::ALL.into_iter().zip(self.models.iter())
    }

    /// Every coefficient of every model multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, RegistryError> {
        let mut models = self.models.clone();
        for m in &mut models {
            *m = m.scaled(factor)?;
        }
        Self::new(models)
    }

    pub fn from_json_str(text: &str) -> Result<Self, RegistryError> {
        let value: Value = serde_json::from_str(text)?;
        let map = value.as_object().ok_or_else(|| RegistryError::Malformed {
            key: "<root>".into(),
            reason: "expected a JSON object".into(),
        })?;
        let entries = parse_entries(map)?;
        Self::from_fn(|c| entries.iter().find(|(k, _)| *k == c).map(|(_, m)| m.clone()))
    }

    pub fn to_json_value(&self) -> Value {
        let mut map = Map::new();
        for (c, m) in self.iter() {
            map.insert(c.key().to_string(), model_to_json(m));
        }
        Value::Object(map)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("JSON values always serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| RegistryError::Io { path: path.display().to_string(), source })?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RegistryError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string() + "\n")
            .map_err(|source| RegistryError::Io { path: path.display().to_string(), source })
    }
}

/// Loads a registry file.
pub fn registry_load(path: impl AsRef<Path>) -> Result<ModelRegistry, RegistryError> {
    ModelRegistry::load(path)
}

/// Writes a registry file.
pub fn registry_save(registry: &ModelRegistry, path: impl AsRef<Path>) -> Result<(), RegistryError> {
    registry.save(path)
}

/// Overwrites the `fitted` entries in an existing registry document (or an
/// empty one when `existing` is `None`) and returns the merged document.
/// The result may hold fewer than five entries, but they must share a unit.
pub fn merge_registry_json(
    existing: Option<&str>,
    fitted: &[(Category, PolynomialModel)],
) -> Result<Value, RegistryError> {
    let mut map = match existing {
        Some(text) => match serde_json::from_str::<Value>(text)? {
            Value::Object(m) => m,
            _ => {
                return Err(RegistryError::Malformed { key: "<root>".into(), reason: "expected a JSON object".into() })
            }
        },
        None => Map::new(),
    };
    for (c, m) in fitted {
        map.insert(c.key().to_string(), model_to_json(m));
    }
    let entries = parse_entries(&map)?;
    if let Some((_, first)) = entries.first() {
        let expected = first.unit();
        for (c, m) in &entries {
            if m.unit() != expected {
                return Err(RegistryError::MixedUnits { key: c.key(), found: m.unit(), expected });
            }
        }
    }
    Ok(Value::Object(map))
}

fn model_to_json(m: &PolynomialModel) -> Value {
    let mut entry = Map::new();
    entry.insert("coefficients".into(), serde_json::json!(m.coefficients()));
    entry.insert("unit".into(), Value::String(m.unit().label().into()));
    if let Some(p) = m.fitted_on() {
        entry.insert("fitted_on".into(), serde_json::to_value(p).expect("provenance serializes"));
    }
    Value::Object(entry)
}

/// Parses whichever of the five keys are present. Unknown keys are ignored.
fn parse_entries(
    map: &Map<String, Value>,
) -> Result<Vec<(Category, PolynomialModel)>, RegistryError> {
    let mut out = Vec::new();
    for c in Category::ALL {
        if let Some(v) = map.get(c.key()) {
            out.push((c, parse_entry(c.key(), v)?));
        }
    }
    Ok(out)
}

fn parse_entry(key: &str, v: &Value) -> Result<PolynomialModel, RegistryError> {
    let malformed = |reason: &str| RegistryError::Malformed { key: key.into(), reason: reason.into() };
    let obj = v.as_object().ok_or_else(|| malformed("expected an object"))?;
    let coeffs = obj
        .get("coefficients")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing `coefficients` array"))?;
    if coeffs.len() != 4 {
        return Err(malformed(&format!("expected 4 coefficients, found {}", coeffs.len())));
    }
    let mut c = [0.0; 4];
    for (slot, value) in c.iter_mut().zip(coeffs) {
        *slot = value.as_f64().ok_or_else(|| malformed("coefficients must be numbers"))?;
    }
    let label = obj
        .get("unit")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("missing `unit` label"))?;
    let unit: TimeUnit = label
        .parse()
        .map_err(|_| RegistryError::UnknownUnit { key: key.into(), label: label.into() })?;
    let mut model = PolynomialModel::new(c, unit)?;
    if let Some(p) = obj.get("fitted_on") {
        if !p.is_null() {
            let p: FitProvenance = serde_json::from_value(p.clone())
                .map_err(|e| malformed(&format!("bad `fitted_on`: {e}")))?;
            model = model.with_provenance(p);
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_values() {
        let r = ModelRegistry::table1();
        assert_eq!(r.unit(), TimeUnit::PaperUnits);
        assert_eq!(r.get(Category::SymmetricEncrypt).alpha2(), 0.05692690466);
        assert_eq!(r.get(Category::AsymmetricDecrypt).alpha1(), 3135.53968253);
        assert_eq!(r.get(Category::Hash).alpha4(), 1.522749902e-11);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let r = ModelRegistry::table1();
        registry_save(&r, &path).unwrap();
        assert_eq!(registry_load(&path).unwrap(), r);
    }

    #[test]
    fn merge_replaces_fitted_and_keeps_the_rest() {
        let hash = PolynomialModel::new([1.0, 2.0, 0.0, 0.0], TimeUnit::Ns).unwrap();
        let partial = merge_registry_json(None, &[(Category::Hash, hash.clone())]).unwrap();
        assert_eq!(partial.as_object().unwrap().len(), 1);

        let full = ModelRegistry::table1().scaled(1.0).unwrap().to_json_string();
        let err = merge_registry_json(Some(&full), &[(Category::Hash, hash.clone())]).unwrap_err();
        assert!(matches!(err, RegistryError::MixedUnits { .. }));

        let ns = ModelRegistry::from_fn(|_| Some(hash.clone())).unwrap().to_json_string();
        let aenc = PolynomialModel::new([5.0, 0.0, 0.0, 0.0], TimeUnit::Ns).unwrap();
        let merged = merge_registry_json(Some(&ns), &[(Category::AsymmetricEncrypt, aenc.clone())]).unwrap();
        let r = ModelRegistry::from_json_str(&merged.to_string()).unwrap();
        assert_eq!(r.get(Category::AsymmetricEncrypt), &aenc);
        assert_eq!(r.get(Category::Hash), &hash);
    }

    #[test]
    fn missing_hash_entry_is_named() {
        let mut v = ModelRegistry::table1().to_json_value();
        v.as_object_mut().unwrap().remove("hash.digest");
        let err = ModelRegistry::from_json_str(&v.to_string()).unwrap_err();
        assert!(matches!(err, RegistryError::MissingKey("hash.digest")));
        assert!(err.to_string().contains("hash.digest"));
    }

    #[test]
    fn malformed_entries() {
        let mut v = ModelRegistry::table1().to_json_value();
        v["symmetric.encrypt"]["coefficients"] = serde_json::json!([1.0, 2.0]);
        assert!(matches!(
            ModelRegistry::from_json_str(&v.to_string()),
            Err(RegistryError::Malformed { .. })
        ));
        let mut v = ModelRegistry::table1().to_json_value();
        v["symmetric.encrypt"]["coefficients"] = serde_json::json!([1.0, "x", 3.0, 4.0]);
        assert!(matches!(
            ModelRegistry::from_json_str(&v.to_string()),
            Err(RegistryError::Malformed { .. })
        ));
        let mut v = ModelRegistry::table1().to_json_value();
        v["hash.digest"]["unit"] = serde_json::json!("fortnights");
        assert!(matches!(
            ModelRegistry::from_json_str(&v.to_string()),
            Err(RegistryError::UnknownUnit { .. })
        ));
    }

    #[test]
    fn mixed_units_rejected() {
        let mut v = ModelRegistry::table1().to_json_value();
        v["hash.digest"]["unit"] = serde_json::json!("ns");
        assert!(matches!(
            ModelRegistry::from_json_str(&v.to_string()),
            Err(RegistryError::MixedUnits { key: "hash.digest", .. })
        ));
    }
}
