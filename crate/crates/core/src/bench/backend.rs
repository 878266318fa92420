use std::sync::Arc;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use super::clock::{Clock, MonotonicClock};
use super::spec::{block_capacity, PrimitiveSpec};
use crate::category::{Category, Mode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("unsupported primitive {spec}: {detail}")]
    Capability { spec: String, detail: String },
    #[error("payload of {len} bytes exceeds the {capacity}-byte block capacity of {spec}")]
    PayloadTooLarge { spec: String, len: usize, capacity: usize },
    #[error("{spec}: {detail}")]
    Crypto { spec: String, detail: String },
    #[error("backend self-test failed for {spec}: {detail}")]
    SelfTest { spec: String, detail: String },
}

/// One algorithm a backend offers and the parameters it accepts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlgorithmSupport {
    pub algorithm: String,
    /// Categories the algorithm serves (e.g. both symmetric encrypt and decrypt).
    pub categories: Vec<Category>,
    /// Empty for non-symmetric algorithms.
    pub modes: Vec<Mode>,
    /// `[0]` for hashes.
    pub key_bits: Vec<u32>,
}

/// What a backend can run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Capabilities {
    pub algorithms: Vec<AlgorithmSupport>,
}

impl Capabilities {
    pub fn support(&self, category: Category, algorithm: &str) -> Option<&AlgorithmSupport> {
        self.algorithms
            .iter()
            .find(|a| a.algorithm == algorithm && a.categories.contains(&category))
    }

    /// Key sizes offered for `(category, algorithm)`, ascending.
    pub fn key_sizes(&self, category: Category, algorithm: &str) -> Vec<u32> {
        let mut keys = self.support(category, algorithm).map(|a| a.key_bits.clone()).unwrap_or_default();
        keys.sort_unstable();
        keys
    }

    /// Every concrete spec the backend supports.
    pub fn specs(&self) -> Vec<PrimitiveSpec> {
        let mut out = Vec::new();
        for a in &self.algorithms {
            for &c in &a.categories {
                for &k in &a.key_bits {
                    if a.modes.is_empty() {
                        out.push(PrimitiveSpec { category: c, algorithm: a.algorithm.clone(), mode: None, key_bits: k });
                    }
                    for &m in &a.modes {
                        out.push(PrimitiveSpec { category: c, algorithm: a.algorithm.clone(), mode: Some(m), key_bits: k });
                    }
                }
            }
        }
        out
    }

    /// Errors name the rejected parameter and list what is supported instead.
    pub fn check(&self, spec: &PrimitiveSpec) -> Result<(), BackendError> {
        let fail = |detail: String| BackendError::Capability { spec: spec.to_string(), detail };
        if let Err(e) = spec.validate() {
            return Err(fail(e.to_string()));
        }
        let Some(support) = self.support(spec.category, &spec.algorithm) else {
            let offered: Vec<&str> = self
                .algorithms
                .iter()
                .filter(|a| a.categories.contains(&spec.category))
                .map(|a| a.algorithm.as_str())
                .collect();
            return Err(fail(format!(
                "algorithm `{}` not available for {}; supported: {}",
                spec.algorithm,
                spec.category,
                offered.join(", ")
            )));
        };
        if let Some(mode) = spec.mode {
            if !support.modes.contains(&mode) {
                let modes: Vec<&str> = support.modes.iter().map(|m| m.label()).collect();
                return Err(fail(format!("mode {mode} not available; supported: {}", modes.join(", "))));
            }
        }
        if !support.key_bits.contains(&spec.key_bits) {
            let keys: Vec<String> = support.key_bits.iter().map(u32::to_string).collect();
            return Err(fail(format!(
                "key size {} not available; supported: {}",
                spec.key_bits,
                keys.join(", ")
            )));
        }
        Ok(())
    }

    /// [`check`](Self::check) plus the asymmetric block-capacity limit.
    pub fn check_payload(&self, spec: &PrimitiveSpec, len: usize) -> Result<(), BackendError> {
        self.check(spec)?;
        if spec.category.is_asymmetric() {
            let capacity = block_capacity(spec.key_bits).unwrap_or(0);
            if len > capacity {
                return Err(BackendError::PayloadTooLarge { spec: spec.to_string(), len, capacity });
            }
        }
        Ok(())
    }
}

/// A provider of real (or simulated) cryptographic operations.
///
/// Decrypt operations receive ciphertext produced by the matching encrypt
/// operation with the same algorithm, mode and key size.
pub trait Backend: Send {
    fn id(&self) -> &str;

    fn capabilities(&self) -> &Capabilities;

    fn sym_encrypt(&mut self, spec: &PrimitiveSpec, payload: &[u8]) -> Result<Vec<u8>, BackendError>;

    fn sym_decrypt(&mut self, spec: &PrimitiveSpec, ciphertext: &[u8]) -> Result<Vec<u8>, BackendError>;

    fn hash(&mut self, spec: &PrimitiveSpec, payload: &[u8]) -> Result<Vec<u8>, BackendError>;

    /// At most `key_bits/8 − 11` payload bytes per call.
    fn asym_encrypt(&mut self, spec: &PrimitiveSpec, payload: &[u8]) -> Result<Vec<u8>, BackendError>;

    fn asym_decrypt(&mut self, spec: &PrimitiveSpec, ciphertext: &[u8]) -> Result<Vec<u8>, BackendError>;

    /// `(hash spec, input, expected digest)` triples checked by the self-test.
    fn known_digests(&self) -> Vec<(PrimitiveSpec, Vec<u8>, Vec<u8>)> {
        Vec::new()
    }

    /// The clock timings against this backend are read from.
    fn clock(&self) -> Arc<dyn Clock> {
        Arc::new(MonotonicClock::default())
    }

    /// Runs the operation selected by `spec.category`.
    fn invoke(&mut self, spec: &PrimitiveSpec, input: &[u8]) -> Result<Vec<u8>, BackendError> {
        match spec.category {
            Category::SymmetricEncrypt => self.sym_encrypt(spec, input),
            Category::SymmetricDecrypt => self.sym_decrypt(spec, input),
            Category::Hash => self.hash(spec, input),
            Category::AsymmetricEncrypt => self.asym_encrypt(spec, input),
            Category::AsymmetricDecrypt => self.asym_decrypt(spec, input),
        }
    }
}

/// Round-trips every supported cipher configuration and checks the
/// backend's known digest vectors.
pub fn run_self_test(backend: &mut dyn Backend) -> Result<(), BackendError> {
    let mut rng = ChaCha20Rng::from_seed([7; 32]);
    let specs = backend.capabilities().specs();
    for spec in specs.iter().filter(|s| matches!(s.category, Category::SymmetricEncrypt | Category::AsymmetricEncrypt)) {
        let len = match spec.block_capacity() {
            Some(cap) => cap,
            None if spec.category.is_asymmetric() => continue,
            None => 1024,
        };
        let mut message = vec![0u8; len];
        rng.fill_bytes(&mut message);
        let ct = backend.invoke(spec, &message)?;
        let dec_spec = spec.with_category(if spec.category.is_symmetric() {
            Category::SymmetricDecrypt
        } else {
            Category::AsymmetricDecrypt
        });
        if backend.capabilities().check(&dec_spec).is_err() {
            continue;
        }
        let back = backend.invoke(&dec_spec, &ct)?;
        if back != message {
            return Err(BackendError::SelfTest {
                spec: spec.to_string(),
                detail: "decrypt(encrypt(m)) != m".into(),
            });
        }
    }
    for spec in specs.iter().filter(|s| s.category == Category::Hash) {
        let a = backend.hash(spec, b"")?;
        let b = backend.hash(spec, &[0x5a; 300])?;
        if a.len() != b.len() || a.is_empty() {
            return Err(BackendError::SelfTest {
                spec: spec.to_string(),
                detail: "digest length depends on input".into(),
            });
        }
    }
    for (spec, input, expected) in backend.known_digests() {
        let got = backend.hash(&spec, &input)?;
        if got != expected {
            return Err(BackendError::SelfTest {
                spec: spec.to_string(),
                detail: "known-answer digest mismatch".into(),
            });
        }
    }
    Ok(())
}
