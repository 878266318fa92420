use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::category::{Category, Mode};

/// One concrete primitive to time: class, algorithm, mode and key size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrimitiveSpec {
    pub category: Category,
    pub algorithm: String,
    /// Present iff the category is symmetric.
    pub mode: Option<Mode>,
    /// 0 for hashes, which take no key.
    pub key_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("symmetric spec `{0}` needs a mode")]
    MissingMode(String),
    #[error("mode is only valid on symmetric specs (`{0}`)")]
    UnexpectedMode(String),
    #[error("{0} spec needs a positive key size")]
    MissingKey(&'static str),
    #[error("malformed spec `{0}`: expected CATEGORY:ALGORITHM[:MODE]:KEYBITS")]
    Malformed(String),
}

impl PrimitiveSpec {
    pub fn new(
        category: Category,
        algorithm: impl Into<String>,
        mode: Option<Mode>,
        key_bits: u32,
    ) -> Result<Self, SpecError> {
        let spec = PrimitiveSpec { category, algorithm: algorithm.into(), mode, key_bits };
        spec.validate()?;
        Ok(spec)
    }

    pub fn symmetric(category: Category, algorithm: &str, mode: Mode, key_bits: u32) -> Self {
        Self::new(category, algorithm, Some(mode), key_bits).expect("valid symmetric spec")
    }

    pub fn hash(algorithm: &str) -> Self {
        Self::new(Category::Hash, algorithm, None, 0).expect("valid hash spec")
    }

    pub fn asymmetric(category: Category, algorithm: &str, key_bits: u32) -> Self {
        Self::new(category, algorithm, None, key_bits).expect("valid asymmetric spec")
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        match (self.category.is_symmetric(), self.mode) {
            (true, None) => return Err(SpecError::MissingMode(self.to_string())),
            (false, Some(_)) => return Err(SpecError::UnexpectedMode(self.to_string())),
            _ => {}
        }
        if self.category != Category::Hash && self.key_bits == 0 {
            return Err(SpecError::MissingKey(self.category.family()));
        }
        Ok(())
    }

    /// Asymmetric plaintext bytes per invocation: `key_bits/8 − 11`.
    pub fn block_capacity(&self) -> Option<usize> {
        self.category.is_asymmetric().then(|| block_capacity(self.key_bits)).flatten()
    }

    /// The same primitive with another key size.
    pub fn with_key_bits(&self, key_bits: u32) -> Self {
        PrimitiveSpec { key_bits, ..self.clone() }
    }

    pub fn with_category(&self, category: Category) -> Self {
        PrimitiveSpec { category, ..self.clone() }
    }
}

/// Plaintext bytes a PKCS#1-style padded block of `key_bits` can carry.
pub fn block_capacity(key_bits: u32) -> Option<usize> {
    (key_bits as usize / 8).checked_sub(11).filter(|c| *c >= 1)
}

impl fmt::Display for PrimitiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.category.keyword(), self.algorithm)?;
        if let Some(m) = self.mode {
            write!(f, ":{m}")?;
        }
        write!(f, ":{}", self.key_bits)
    }
}

impl FromStr for PrimitiveSpec {
    type Err = SpecError;

    /// `CATEGORY:ALGORITHM[:MODE]:KEYBITS`, e.g. `senc:aes:cbc:128`,
    /// `hash:sha1:0`, `adec:rsa:2048`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || SpecError::Malformed(s.to_string());
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let (cat, alg, mode, key) = match parts.as_slice() {
            [c, a, k] => (c, a, None, k),
            [c, a, m, k] => (c, a, Some(m), k),
            _ => return Err(malformed()),
        };
        let category: Category = cat.parse().map_err(|_| malformed())?;
        let mode = mode.map(|m| m.parse::<Mode>()).transpose().map_err(|_| malformed())?;
        let key_bits: u32 = key.parse().map_err(|_| malformed())?;
        if alg.is_empty() {
            return Err(malformed());
        }
        PrimitiveSpec::new(category, alg.to_ascii_lowercase(), mode, key_bits)
    }
}

/// How repetitions are folded into one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Mean,
    #[default]
    Median,
}

impl FromStr for Aggregator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Aggregator::Mean),
            "median" => Ok(Aggregator::Median),
            other => Err(format!("unknown aggregator `{other}` (expected mean or median)")),
        }
    }
}

/// Whether invocations shorter than the timer can resolve are batched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Batching {
    /// Batch `k` invocations per timing window, with the smallest `k` whose
    /// window clears 64 clock ticks.
    #[default]
    Auto,
    /// Never batch; fail if one invocation is below the threshold.
    Off,
    /// Exactly `k` invocations per window, no threshold check. `Fixed(1)`
    /// gives a raw unbatched reading.
    Fixed(u64),
}

/// Sweep and repetition settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Strictly ascending payload sizes in bytes.
    pub sizes: Vec<usize>,
    pub repetitions: u32,
    pub warmup: u32,
    pub aggregator: Aggregator,
    pub batching: Batching,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            sizes: (4..=14).map(|p| 1usize << p).collect(),
            repetitions: 32,
            warmup: 4,
            aggregator: Aggregator::Median,
            batching: Batching::Auto,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.sizes.is_empty() {
            return Err("sweep needs at least one size".into());
        }
        if self.sizes.contains(&0) {
            return Err("sweep sizes must be at least 1 byte".into());
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err("sweep sizes must be strictly ascending".into());
        }
        if self.repetitions == 0 {
            return Err("repetitions must be at least 1".into());
        }
        if self.batching == Batching::Fixed(0) {
            return Err("a fixed batch needs at least one invocation".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_spec_strings() {
        let s: PrimitiveSpec = "senc:aes:CBC:128".parse().unwrap();
        assert_eq!(s, PrimitiveSpec::symmetric(Category::SymmetricEncrypt, "aes", Mode::Cbc, 128));
        assert_eq!(s.to_string(), "senc:aes:cbc:128");
        let h: PrimitiveSpec = "hash:sha1:0".parse().unwrap();
        assert_eq!(h, PrimitiveSpec::hash("sha1"));
        let a: PrimitiveSpec = "asymmetric.decrypt:rsa:2048".parse().unwrap();
        assert_eq!(a.block_capacity(), Some(245));
    }

    #[test]
    fn rejects_inconsistent_specs() {
        assert!(matches!("senc:aes:128".parse::<PrimitiveSpec>(), Err(SpecError::MissingMode(_))));
        assert!(matches!(
            "hash:sha1:cbc:0".parse::<PrimitiveSpec>(),
            Err(SpecError::UnexpectedMode(_))
        ));
        assert!(matches!("aenc:rsa:0".parse::<PrimitiveSpec>(), Err(SpecError::MissingKey(_))));
        assert!(matches!("nonsense".parse::<PrimitiveSpec>(), Err(SpecError::Malformed(_))));
        assert!(matches!("hash:sha1:x".parse::<PrimitiveSpec>(), Err(SpecError::Malformed(_))));
    }

    #[test]
    fn default_sweep_is_eleven_powers_of_two() {
        let cfg = SweepConfig::default();
        assert_eq!(cfg.sizes.len(), 11);
        assert_eq!(cfg.sizes.first(), Some(&16));
        assert_eq!(cfg.sizes.last(), Some(&16384));
        assert!(cfg.validate().is_ok());
        let bad = SweepConfig { sizes: vec![32, 16], ..SweepConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn capacity_needs_room_for_padding() {
        assert_eq!(block_capacity(1024), Some(117));
        assert_eq!(block_capacity(88), None);
        assert_eq!(block_capacity(96), Some(1));
    }
}
