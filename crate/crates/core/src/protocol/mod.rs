//! Protocols as ordered message steps, each carrying a flat list of
//! cryptographic operations, plus the text DSL they are written in.
//!
//! ```text
//! protocol handshake {
//!   # comments run to end of line
//!   A -> B: aenc(size=32, key=2048)
//!   B -> A: senc(size=80, key=128); hash(size=80)
//! }
//! ```

mod parser;

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

pub use parser::{parse_corpus, parse_protocol, ParseError, ParseErrorKind};

use crate::bench::{block_capacity, PrimitiveSpec};
use crate::category::{Category, Mode};

pub const DEFAULT_SYMMETRIC_ALG: &str = "aes";
pub const DEFAULT_HASH_ALG: &str = "sha1";
pub const DEFAULT_ASYMMETRIC_ALG: &str = "rsa";
pub const DEFAULT_MODE: Mode = Mode::Cbc;
pub const DEFAULT_SYMMETRIC_KEY_BITS: u32 = 128;
pub const DEFAULT_ASYMMETRIC_KEY_BITS: u32 = 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("payload size must be at least 1 byte")]
    EmptyPayload,
    #[error("mode is only allowed on symmetric operations, not {0}")]
    ModeOnNonSymmetric(&'static str),
    #[error("symmetric operation needs a mode")]
    MissingMode,
    #[error("key is not allowed on hash operations")]
    KeyOnHash,
    #[error("{0} operation needs a positive key size")]
    MissingKey(&'static str),
    #[error("algorithm name must be a non-empty identifier, got `{0}`")]
    BadAlgorithm(String),
    #[error("`{0}` is not a valid identifier")]
    BadIdentifier(String),
    #[error("step sender and receiver are both `{0}`")]
    SameEndpoints(String),
    #[error("step has no operations")]
    EmptyStep,
    #[error("protocol has no steps")]
    NoSteps,
}

/// Identifiers: ASCII letters, digits and `_`, not all digits.
pub fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
        && !s.bytes().all(|b| b.is_ascii_digit())
}

/// One cryptographic operation with its parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CryptoOp {
    pub category: Category,
    pub payload_bytes: u64,
    pub algorithm: String,
    /// Symmetric only.
    pub mode: Option<Mode>,
    /// 0 for hashes.
    pub key_bits: u32,
}

impl CryptoOp {
    /// An op with the default algorithm, mode and key for its category.
    pub fn new(category: Category, payload_bytes: u64) -> Self {
        let (algorithm, mode, key_bits) = match category {
            Category::SymmetricEncrypt | Category::SymmetricDecrypt => {
                (DEFAULT_SYMMETRIC_ALG, Some(DEFAULT_MODE), DEFAULT_SYMMETRIC_KEY_BITS)
            }
            Category::Hash => (DEFAULT_HASH_ALG, None, 0),
            Category::AsymmetricEncrypt | Category::AsymmetricDecrypt => {
                (DEFAULT_ASYMMETRIC_ALG, None, DEFAULT_ASYMMETRIC_KEY_BITS)
            }
        };
        CryptoOp { category, payload_bytes, algorithm: algorithm.into(), mode, key_bits }
    }

    pub fn with_algorithm(mut self, algorithm: impl Into<String>) -> Self {
        self.algorithm = algorithm.into();
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = Some(mode);
        self
    }

    pub fn with_key_bits(mut self, key_bits: u32) -> Self {
        self.key_bits = key_bits;
        self
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.payload_bytes == 0 {
            return Err(ProtocolError::EmptyPayload);
        }
        if !is_identifier(&self.algorithm) {
            return Err(ProtocolError::BadAlgorithm(self.algorithm.clone()));
        }
        match (self.category.is_symmetric(), self.mode) {
            (true, None) => return Err(ProtocolError::MissingMode),
            (false, Some(_)) => return Err(ProtocolError::ModeOnNonSymmetric(self.category.keyword())),
            _ => {}
        }
        match (self.category, self.key_bits) {
            (Category::Hash, 0) => Ok(()),
            (Category::Hash, _) => Err(ProtocolError::KeyOnHash),
            (c, 0) => Err(ProtocolError::MissingKey(c.family())),
            _ => Ok(()),
        }
    }

    /// The benchmark spec this op runs as.
    pub fn spec(&self) -> PrimitiveSpec {
        PrimitiveSpec {
            category: self.category,
            algorithm: self.algorithm.clone(),
            mode: self.mode,
            key_bits: self.key_bits,
        }
    }

    /// Backend invocations needed: 1 for symmetric and hash ops,
    /// `ceil(payload / capacity)` for asymmetric ones. `None` when the key
    /// cannot hold a single padded byte.
    pub fn invocations(&self) -> Option<u64> {
        if self.category.is_asymmetric() {
            let cap = block_capacity(self.key_bits)? as u64;
            Some(self.payload_bytes.div_ceil(cap))
        } else {
            Some(1)
        }
    }
}

impl fmt::Display for CryptoOp {
    /// Canonical form, every attribute explicit: `size, alg, mode, key`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(size={}, alg={}", self.category.keyword(), self.payload_bytes, self.algorithm)?;
        if let Some(m) = self.mode {
            write!(f, ", mode={m}")?;
        }
        if self.category != Category::Hash {
            write!(f, ", key={}", self.key_bits)?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProtocolStep {
    pub sender: String,
    pub receiver: String,
    pub ops: Vec<CryptoOp>,
}

impl ProtocolStep {
    pub fn new(sender: impl Into<String>, receiver: impl Into<String>, ops: Vec<CryptoOp>) -> Result<Self, ProtocolError> {
        let step = ProtocolStep { sender: sender.into(), receiver: receiver.into(), ops };
        step.validate()?;
        Ok(step)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        for name in [&self.sender, &self.receiver] {
            if !is_identifier(name) {
                return Err(ProtocolError::BadIdentifier(name.clone()));
            }
        }
        if self.sender == self.receiver {
            return Err(ProtocolError::SameEndpoints(self.sender.clone()));
        }
        if self.ops.is_empty() {
            return Err(ProtocolError::EmptyStep);
        }
        self.ops.iter().try_for_each(CryptoOp::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Protocol {
    pub id: String,
    pub steps: Vec<ProtocolStep>,
}

impl Protocol {
    pub fn new(id: impl Into<String>, steps: Vec<ProtocolStep>) -> Result<Self, ProtocolError> {
        let p = Protocol { id: id.into(), steps };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !is_identifier(&self.id) {
            return Err(ProtocolError::BadIdentifier(self.id.clone()));
        }
        if self.steps.is_empty() {
            return Err(ProtocolError::NoSteps);
        }
        self.steps.iter().try_for_each(ProtocolStep::validate)
    }

    /// All ops in execution order.
    pub fn ops(&self) -> impl Iterator<Item = &CryptoOp> {
        self.steps.iter().flat_map(|s| s.ops.iter())
    }

    pub fn op_count(&self) -> usize {
        self.steps.iter().map(|s| s.ops.len()).sum()
    }

    /// `self`'s steps followed by `other`'s, under a new id.
    pub fn concat(&self, other: &Protocol, id: impl Into<String>) -> Protocol {
        Protocol { id: id.into(), steps: self.steps.iter().chain(&other.steps).cloned().collect() }
    }

    /// Canonical text: one step per line, attributes in fixed order with
    /// every default written out.
    pub fn to_canonical(&self) -> String {
        let mut out = format!("protocol {} {{\n", self.id);
        for step in &self.steps {
            let _ = write!(out, "  {} -> {}: ", step.sender, step.receiver);
            for (i, op) in step.ops.iter().enumerate() {
                if i > 0 {
                    out.push_str("; ");
                }
                let _ = write!(out, "{op}");
            }
            out.push('\n');
        }
        out.push_str("}\n");
        out
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical())
    }
}

pub fn serialize_protocol(p: &Protocol) -> String {
    p.to_canonical()
}

/// Canonical blocks separated by one blank line.
pub fn serialize_corpus(corpus: &[Protocol]) -> String {
    corpus.iter().map(Protocol::to_canonical).collect::<Vec<_>>().join("\n")
}
