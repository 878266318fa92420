//! The five algorithm classes a cost model is kept for.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One algorithm class together with the operation performed.
///
/// Every protocol operation, every benchmark spec and every registry entry is
/// keyed by exactly one of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    SymmetricEncrypt,
    SymmetricDecrypt,
    Hash,
    AsymmetricEncrypt,
    AsymmetricDecrypt,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::SymmetricEncrypt,
        Category::SymmetricDecrypt,
        Category::Hash,
        Category::AsymmetricEncrypt,
        Category::AsymmetricDecrypt,
    ];

    /// Registry key, e.g. `symmetric.encrypt`.
    pub fn key(self) -> &'static str {
        match self {
            Category::SymmetricEncrypt => "symmetric.encrypt",
            Category::SymmetricDecrypt => "symmetric.decrypt",
            Category::Hash => "hash.digest",
            Category::AsymmetricEncrypt => "asymmetric.encrypt",
            Category::AsymmetricDecrypt => "asymmetric.decrypt",
        }
    }

    /// DSL keyword (`senc`, `sdec`, `hash`, `aenc`, `adec`).
    pub fn keyword(self) -> &'static str {
        match self {
            Category::SymmetricEncrypt => "senc",
            Category::SymmetricDecrypt => "sdec",
            Category::Hash => "hash",
            Category::AsymmetricEncrypt => "aenc",
            Category::AsymmetricDecrypt => "adec",
        }
    }

    /// The class half of the key: `symmetric`, `hash` or `asymmetric`.
    pub fn family(self) -> &'static str {
        self.key().split('.').next().unwrap_or_default()
    }

    /// The operation half of the key: `encrypt`, `decrypt` or `digest`.
    pub fn operation(self) -> &'static str {
        self.key().split('.').nth(1).unwrap_or_default()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_symmetric(self) -> bool {
        matches!(self, Category::SymmetricEncrypt | Category::SymmetricDecrypt)
    }

    pub fn is_asymmetric(self) -> bool {
        matches!(self, Category::AsymmetricEncrypt | Category::AsymmetricDecrypt)
    }

    pub fn is_decrypt(self) -> bool {
        matches!(self, Category::SymmetricDecrypt | Category::AsymmetricDecrypt)
    }

    /// The encrypting counterpart of a decrypt category; other categories map to themselves.
    pub fn encrypt_counterpart(self) -> Category {
        match self {
            Category::SymmetricDecrypt => Category::SymmetricEncrypt,
            Category::AsymmetricDecrypt => Category::AsymmetricEncrypt,
            other => other,
        }
    }

    pub fn from_keyword(word: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.keyword() == word)
    }

    pub fn from_key(key: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.key() == key)
    }

    pub fn from_parts(family: &str, operation: &str) -> Option<Category> {
        Category::ALL
            .into_iter()
            .find(|c| c.family() == family && c.operation() == operation)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown category `{0}` (expected one of senc, sdec, hash, aenc, adec or a registry key such as symmetric.encrypt)")]
pub struct UnknownCategory(pub String);

impl FromStr for Category {
    type Err = UnknownCategory;

    /// Accepts both the DSL keyword and the registry key.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Category::from_keyword(&lower)
            .or_else(|| Category::from_key(&lower))
            .ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

/// Block-cipher mode of operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Ecb,
    Cbc,
    Cfb,
    Ofb,
    Ctr,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Ecb, Mode::Cbc, Mode::Cfb, Mode::Ofb, Mode::Ctr];

    /// Lower-case label as written in protocol texts and CSV files.
    pub fn label(self) -> &'static str {
        match self {
            Mode::Ecb => "ecb",
            Mode::Cbc => "cbc",
            Mode::Cfb => "cfb",
            Mode::Ofb => "ofb",
            Mode::Ctr => "ctr",
        }
    }

    /// Stream-like modes produce ciphertext of the plaintext's length;
    /// ECB and CBC pad to the block size.
    pub fn is_padded(self) -> bool {
        matches!(self, Mode::Ecb | Mode::Cbc)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown mode `{0}` (expected one of ECB, CBC, CFB, OFB, CTR)")]
pub struct UnknownMode(pub String);

impl FromStr for Mode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Mode::ALL
            .into_iter()
            .find(|m| m.label() == lower)
            .ok_or_else(|| UnknownMode(s.to_string()))
    }
}
