//! A backend whose cost is an exactly known cubic per category.
//!
//! In [`SyntheticMode::Virtual`] it advances a [`VirtualClock`] by the
//! analytic cost and every timing is reproducible to the nanosecond. In
//! [`SyntheticMode::BusyWait`] it spins on the real clock for that long,
//! which is what the harness calibration checks use.

use std::sync::Arc;
use std::time::{Duration, Instant};

use super::backend::{AlgorithmSupport, Backend, BackendError, Capabilities};
use super::clock::{Clock, MonotonicClock, VirtualClock};
use super::spec::PrimitiveSpec;
use crate::category::{Category, Mode};
use crate::model::{PolynomialModel, TimeUnit};

/// Cost in ns as a cubic in x (payload bytes, or key bits for asymmetric).
#[derive(Debug, Clone, PartialEq)]
pub struct CostProfile {
    /// `[α₁, α₂, α₃, α₄]` per category, in [`Category::ALL`] order.
    pub coefficients: [[f64; 4]; 5],
}

impl Default for CostProfile {
    /// Dyadic coefficients, so every cost at power-of-two sizes ≥ 16 bytes
    /// and at the offered key sizes is a whole number of nanoseconds.
    fn default() -> Self {
        CostProfile {
            coefficients: [
                [600.0, 2.0, 0.0, 0.0],
                [550.0, 2.25, 0.0, 0.0],
                [250.0, 3.0, 0.0, 0.0],
                [20_000.0, 8.0, 1.0 / 65_536.0, 1.0 / 16_777_216.0],
                [150_000.0, 40.0, 1.0 / 4096.0, 1.0 / 1_048_576.0],
            ],
        }
    }
}

impl CostProfile {
    /// `base_ns + per_byte_ns × x` for every category.
    pub fn linear(base_ns: f64, per_byte_ns: f64) -> Self {
        CostProfile { coefficients: [[base_ns, per_byte_ns, 0.0, 0.0]; 5] }
    }

    pub fn with_category(mut self, category: Category, coefficients: [f64; 4]) -> Self {
        self.coefficients[category.index()] = coefficients;
        self
    }

    pub fn cost_ns(&self, category: Category, x: f64) -> f64 {
        let [a1, a2, a3, a4] = self.coefficients[category.index()];
        a1 + x * (a2 + x * (a3 + x * a4))
    }

    pub fn model(&self, category: Category) -> PolynomialModel {
        PolynomialModel::new(self.coefficients[category.index()], TimeUnit::Ns).expect("finite profile")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticMode {
    Virtual,
    BusyWait,
}

pub struct SyntheticBackend {
    profile: CostProfile,
    mode: SyntheticMode,
    virtual_clock: Arc<VirtualClock>,
    caps: Capabilities,
}

pub const SYNTHETIC_RSA_KEY_BITS: [u32; 7] = [512, 768, 1024, 1536, 2048, 3072, 4096];

impl SyntheticBackend {
    pub const ID: &'static str = "synthetic";
    pub const BUSYWAIT_ID: &'static str = "synthetic-busywait";

    pub fn new(profile: CostProfile, mode: SyntheticMode) -> Self {
        let sym = vec![Category::SymmetricEncrypt, Category::SymmetricDecrypt];
        let cipher = |name: &str, keys: &[u32]| AlgorithmSupport {
            algorithm: name.into(),
            categories: sym.clone(),
            modes: Mode::ALL.to_vec(),
            key_bits: keys.to_vec(),
        };
        let digest = |name: &str| AlgorithmSupport {
            algorithm: name.into(),
            categories: vec![Category::Hash],
            modes: vec![],
            key_bits: vec![0],
        };
        let caps = Capabilities {
            algorithms: vec![
                cipher("aes", &[128, 192, 256]),
                cipher("des", &[64]),
                cipher("3des", &[192]),
                digest("md4"),
                digest("md5"),
                digest("sha1"),
                digest("sha256"),
                digest("sha512"),
                AlgorithmSupport {
                    algorithm: "rsa".into(),
                    categories: vec![Category::AsymmetricEncrypt, Category::AsymmetricDecrypt],
                    modes: vec![],
                    key_bits: SYNTHETIC_RSA_KEY_BITS.to_vec(),
                },
            ],
        };
        SyntheticBackend { profile, mode, virtual_clock: Arc::default(), caps }
    }

    /// Deterministic backend with the default profile.
    pub fn deterministic() -> Self {
        Self::new(CostProfile::default(), SyntheticMode::Virtual)
    }

    pub fn busy_wait(profile: CostProfile) -> Self {
        Self::new(profile, SyntheticMode::BusyWait)
    }

    pub fn profile(&self) -> &CostProfile {
        &self.profile
    }

    /// Runs `work` and charges the profile cost for it. In busy-wait mode the
    /// spin counts from before `work`, so the whole call costs what the
    /// profile says rather than the profile plus the stand-in work.
    fn charged<T>(&self, category: Category, x: f64, work: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = work();
        let ns = self.profile.cost_ns(category, x).round().max(0.0) as u64;
        match self.mode {
            SyntheticMode::Virtual => self.virtual_clock.advance(ns),
            SyntheticMode::BusyWait => {
                let target = Duration::from_nanos(ns);
                while start.elapsed() < target {
                    std::hint::spin_loop();
                }
            }
        }
        out
    }

    fn keystream(spec: &PrimitiveSpec, i: usize) -> u8 {
        (spec.key_bits as u8).wrapping_add((i as u8).wrapping_mul(151)) ^ 0xa5
    }
}

impl Backend for SyntheticBackend {
    fn id(&self) -> &str {
        match self.mode {
            SyntheticMode::Virtual => Self::ID,
            SyntheticMode::BusyWait => Self::BUSYWAIT_ID,
        }
    }

    fn capabilities(&self) -> &Capabilities {
        &self.caps
    }

    fn sym_encrypt(&mut self, spec: &PrimitiveSpec, payload: &[u8]) -> Result<Vec<u8>, BackendError> {
        self.caps.check(spec)?;
        Ok(self.charged(spec.category, payload.len() as f64, || {
            payload.iter().enumerate().map(|(i, b)| b ^ Self::keystream(spec, i)).collect()
        }))
    }

    fn sym_decrypt(&mut self, spec: &PrimitiveSpec, ciphertext: &[u8]) -> Result<Vec<u8>, BackendError> {
        self.caps.check(spec)?;
        Ok(self.charged(spec.category, ciphertext.len() as f64, || {
            ciphertext.iter().enumerate().map(|(i, b)| b ^ Self::keystream(spec, i)).collect()
        }))
    }

    fn hash(&mut self, spec: &PrimitiveSpec, payload: &[u8]) -> Result<Vec<u8>, BackendError> {
        self.caps.check(spec)?;
        Ok(self.charged(spec.category, payload.len() as f64, || fake_digest(payload)))
    }

    fn asym_encrypt(&mut self, spec: &PrimitiveSpec, payload: &[u8]) -> Result<Vec<u8>, BackendError> {
        self.caps.check_payload(spec, payload.len())?;
        Ok(self.charged(spec.category, spec.key_bits as f64, || {
            let mut out = vec![0u8; spec.key_bits as usize / 8];
            out[..2].copy_from_slice(&(payload.len() as u16).to_be_bytes());
            for (i, b) in payload.iter().enumerate() {
                out[2 + i] = b ^ Self::keystream(spec, i);
            }
            out
        }))
    }

    fn asym_decrypt(&mut self, spec: &PrimitiveSpec, ciphertext: &[u8]) -> Result<Vec<u8>, BackendError> {
        self.caps.check(spec)?;
        if ciphertext.len() != spec.key_bits as usize / 8 {
            return Err(BackendError::Crypto { spec: spec.to_string(), detail: "ciphertext length".into() });
        }
        Ok(self.charged(spec.category, spec.key_bits as f64, || {
            let len = u16::from_be_bytes([ciphertext[0], ciphertext[1]]) as usize;
            ciphertext[2..2 + len].iter().enumerate().map(|(i, b)| b ^ Self::keystream(spec, i)).collect()
        }))
    }

    fn known_digests(&self) -> Vec<(PrimitiveSpec, Vec<u8>, Vec<u8>)> {
        vec![(PrimitiveSpec::hash("sha1"), b"abc".to_vec(), fake_digest(b"abc"))]
    }

    fn clock(&self) -> Arc<dyn Clock> {
        match self.mode {
            SyntheticMode::Virtual => self.virtual_clock.clone(),
            SyntheticMode::BusyWait => Arc::new(MonotonicClock::default()),
        }
    }
}

/// 20-byte FNV-1a-derived stand-in digest.
fn fake_digest(data: &[u8]) -> Vec<u8> {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in data {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut out = Vec::with_capacity(20);
    for i in 0..20u64 {
        out.push((h.rotate_left((i * 13) as u32) >> 56) as u8 ^ i as u8);
    }
    out
}
