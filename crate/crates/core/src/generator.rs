//! Seeded random protocol corpora.
//!
//! Every draw comes from one ChaCha20 stream so a `(seed, n, cfg)` triple
//! names the same corpus on any platform and in any language that follows
//! [`GENERATOR_ALGORITHM`]:
//!
//! * key: the seed's 8 little-endian bytes, zero-padded to 32; nonce 0,
//!   block counter from 0 (the RFC 8439 block function, 20 rounds).
//! * `u64` draw: two consecutive 32-bit output words, low word first.
//! * index in `0..n`: `(u64 × n) >> 64`.
//! * weighted choice: `u = (u64 >> 11) × 2⁻⁵³`, then the first kind whose
//!   cumulative weight exceeds `u × Σweights` (kinds with weight 0 skipped).
//!
//! Draw order per protocol: step count; per step sender, receiver (index
//! into the principals other than the sender), op count; per op kind, key
//! (symmetric or asymmetric ops only) and payload index. The payload index
//! is drawn even when there is only one choice, so corpora generated with
//! different `payload_choices` share their structure.

use std::cmp::Ordering;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::bench::block_capacity;
use crate::category::Category;
use crate::protocol::{is_identifier, CryptoOp, Protocol, ProtocolStep};

pub const GENERATOR_ALGORITHM: &str = "chacha20-le64-mulshift-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Inclusive `[min, max]` steps per protocol.
    pub steps_range: [u32; 2],
    pub ops_per_step_range: [u32; 2],
    pub payload_choices: Vec<u64>,
    pub symmetric_keys: Vec<u32>,
    pub asymmetric_keys: Vec<u32>,
    /// Over senc, sdec, hash, aenc, adec.
    pub kind_weights: [f64; 5],
    pub principals: Vec<String>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            steps_range: [1, 4],
            ops_per_step_range: [1, 3],
            payload_choices: vec![10, 16, 80, 128, 300, 512, 1024],
            symmetric_keys: vec![128, 256],
            asymmetric_keys: vec![1024, 2048],
            kind_weights: [1.0; 5],
            principals: vec!["A".into(), "B".into(), "S".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("need at least one protocol")]
    EmptyCorpus,
    #[error("pairing needs at least 2 protocols, got {0}")]
    TooFewForPairs(usize),
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::Config(m));
        for (name, [lo, hi]) in [("steps_range", self.steps_range), ("ops_per_step_range", self.ops_per_step_range)] {
            if lo == 0 || lo > hi {
                return bad(format!("{name} [{lo}, {hi}] must satisfy 1 <= min <= max"));
            }
        }
        if self.payload_choices.is_empty() || self.payload_choices.contains(&0) {
            return bad("payload_choices must be non-empty and all >= 1".into());
        }
        if self.principals.len() < 2 {
            return bad("need at least two principals".into());
        }
        for (i, p) in self.principals.iter().enumerate() {
            if !is_identifier(p) {
                return bad(format!("principal `{p}` is not an identifier"));
            }
            if self.principals[..i].contains(p) {
                return bad(format!("principal `{p}` listed twice"));
            }
        }
        if self.kind_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("kind weights must be finite and non-negative".into());
        }
        if self.kind_weights.iter().sum::<f64>() <= 0.0 {
            return bad("kind weights are all zero".into());
        }
        let weight = |c: Category| self.kind_weights[c.index()];
        let sym_used = weight(Category::SymmetricEncrypt) + weight(Category::SymmetricDecrypt) > 0.0;
        let asym_used = weight(Category::AsymmetricEncrypt) + weight(Category::AsymmetricDecrypt) > 0.0;
        if sym_used && (self.symmetric_keys.is_empty() || self.symmetric_keys.contains(&0)) {
            return bad("symmetric ops are weighted but symmetric_keys is empty or has 0".into());
        }
        if asym_used {
            if self.asymmetric_keys.is_empty() {
                return bad("asymmetric ops are weighted but asymmetric_keys is empty".into());
            }
            if let Some(k) = self.asymmetric_keys.iter().find(|&&k| block_capacity(k).is_none()) {
                return bad(format!("asymmetric key {k} cannot hold one padded byte"));
            }
        }
        Ok(())
    }
}

/// The documented draw primitives over ChaCha20.
pub struct CorpusRng {
    inner: ChaCha20Rng,
}

impl CorpusRng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        CorpusRng { inner: ChaCha20Rng::from_seed(key) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `0..n`, `n ≥ 1`.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Index drawn with probability proportional to `weights`.
    pub fn weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let u = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }

    fn in_range(&mut self, [lo, hi]: [u32; 2]) -> u32 {
        lo + self.index((hi - lo + 1) as usize) as u32
    }
}

/// `n` protocols with ids `p0000`, `p0001`, ….
pub fn generate_corpus(seed: u64, n: usize, cfg: &GenConfig) -> Result<Vec<Protocol>, GenError> {
    cfg.validate()?;
    if n == 0 {
        return Err(GenError::EmptyCorpus);
    }
    let mut rng = CorpusRng::new(seed);
    Ok((0..n).map(|i| generate_one(&mut rng, format!("p{i:04}"), cfg)).collect())
}

fn generate_one(rng: &mut CorpusRng, id: String, cfg: &GenConfig) -> Protocol {
    let steps = rng.in_range(cfg.steps_range);
    let mut out = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        let s = rng.index(cfg.principals.len());
        let mut r = rng.index(cfg.principals.len() - 1);
        if r >= s {
            r += 1;
        }
        let n_ops = rng.in_range(cfg.ops_per_step_range);
        let ops = (0..n_ops).map(|_| generate_op(rng, cfg)).collect();
        out.push(ProtocolStep { sender: cfg.principals[s].clone(), receiver: cfg.principals[r].clone(), ops });
    }
    Protocol { id, steps: out }
}

fn generate_op(rng: &mut CorpusRng, cfg: &GenConfig) -> CryptoOp {
    let category = Category::ALL[rng.weighted(&cfg.kind_weights)];
    let key_bits = if category.is_symmetric() {
        cfg.symmetric_keys[rng.index(cfg.symmetric_keys.len())]
    } else if category.is_asymmetric() {
        cfg.asymmetric_keys[rng.index(cfg.asymmetric_keys.len())]
    } else {
        0
    };
    let mut payload = cfg.payload_choices[rng.index(cfg.payload_choices.len())];
    if category.is_asymmetric() {
        let cap = block_capacity(key_bits).expect("validated") as u64;
        if payload > cap {
            payload = cfg.payload_choices.iter().copied().filter(|&c| c <= cap).max().unwrap_or(cap);
        }
    }
    let op = CryptoOp::new(category, payload);
    if category == Category::Hash {
        op
    } else {
        op.with_key_bits(key_bits)
    }
}

/// What the sidecar JSON next to a corpus file records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSidecar {
    pub generator: String,
    pub seed: u64,
    pub n: usize,
    pub config: GenConfig,
}

impl CorpusSidecar {
    pub fn new(seed: u64, n: usize, cfg: &GenConfig) -> Self {
        CorpusSidecar { generator: GENERATOR_ALGORITHM.into(), seed, n, config: cfg.clone() }
    }
}

/// Every ordered pair of distinct protocols, `n(n−1)` in total, in
/// lexicographic `(p_id, q_id)` order.
pub fn all_ordered_pairs(corpus: &[Protocol]) -> Result<Vec<(&Protocol, &Protocol)>, GenError> {
    Ok(ordered_pair_indices(corpus)?.into_iter().map(|(i, j)| (&corpus[i], &corpus[j])).collect())
}

/// [`all_ordered_pairs`] as index pairs into `corpus`.
pub fn ordered_pair_indices(corpus: &[Protocol]) -> Result<Vec<(usize, usize)>, GenError> {
    if corpus.len() < 2 {
        return Err(GenError::TooFewForPairs(corpus.len()));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by(|&a, &b| corpus[a].id.cmp(&corpus[b].id).then(a.cmp(&b)));
    let mut out = Vec::with_capacity(corpus.len() * (corpus.len() - 1));
    for &i in &order {
        for &j in &order {
            if i != j {
                out.push((i, j));
            }
        }
    }
    debug_assert!(out.windows(2).all(|w| {
        let key = |(a, b): (usize, usize)| (&corpus[a].id, &corpus[b].id);
        key(w[0]).cmp(&key(w[1])) != Ordering::Greater
    }));
    Ok(out)
}
