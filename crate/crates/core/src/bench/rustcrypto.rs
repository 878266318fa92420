//! Backend over the RustCrypto crates: AES/DES/3DES in five modes, MD4, MD5,
//! SHA-1, SHA-256, SHA-512 and PKCS#1 v1.5 RSA.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use aes::cipher::block_padding::Pkcs7;
use aes::cipher::{
    AsyncStreamCipher, BlockCipher, BlockDecryptMut, BlockEncryptMut, KeyInit,
    KeyIvInit, StreamCipher,
};
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use rsa::{Pkcs1v15Encrypt, RsaPrivateKey, RsaPublicKey};
use sha1::Digest;

use super::backend::{AlgorithmSupport, Backend, BackendError, Capabilities};
use super::spec::PrimitiveSpec;

type KeyPair = (RsaPrivateKey, RsaPublicKey);
use crate::category::{Category, Mode};

pub const DEFAULT_RSA_KEY_BITS: [u32; 5] = [512, 768, 1024, 1536, 2048];

/// Production backend. Keys are derived deterministically so every run
/// times identical work.
pub struct RustCryptoBackend {
    caps: Capabilities,
    rng: ChaCha20Rng,
}

impl Default for RustCryptoBackend {
    fn default() -> Self {
        Self::with_rsa_keys(&DEFAULT_RSA_KEY_BITS)
    }
}

impl RustCryptoBackend {
    pub const ID: &'static str = "rustcrypto";

    pub fn with_rsa_keys(rsa_key_bits: &[u32]) -> Self {
        let sym = [Category::SymmetricEncrypt, Category::SymmetricDecrypt];
        let asym = [Category::AsymmetricEncrypt, Category::AsymmetricDecrypt];
        let cipher = |name: &str, keys: &[u32]| AlgorithmSupport {
            algorithm: name.into(),
            categories: sym.to_vec(),
            modes: Mode::ALL.to_vec(),
            key_bits: keys.to_vec(),
        };
        let digest = |name: &str| AlgorithmSupport {
            algorithm: name.into(),
            categories: vec![Category::Hash],
            modes: vec![],
            key_bits: vec![0],
        };
        let mut keys = rsa_key_bits.to_vec();
        keys.sort_unstable();
        keys.dedup();
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
                    categories: asym.to_vec(),
                    modes: vec![],
                    key_bits: keys,
                },
            ],
        };
        RustCryptoBackend { caps, rng: ChaCha20Rng::from_seed([0x42; 32]) }
    }

    fn rsa_key(bits: u32) -> Result<Arc<KeyPair>, BackendError> {
        static KEYS: OnceLock<Mutex<HashMap<u32, Arc<KeyPair>>>> = OnceLock::new();
        let mut cache = KEYS.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
        if let Some(k) = cache.get(&bits) {
            return Ok(k.clone());
        }
        let mut seed = [0u8; 32];
        seed[..4].copy_from_slice(&bits.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(seed);
        let private = RsaPrivateKey::new(&mut rng, bits as usize).map_err(|e| BackendError::Crypto {
            spec: format!("rsa-{bits}"),
            detail: format!("key generation failed: {e}"),
        })?;
        let public = private.to_public_key();
        let pair = Arc::new((private, public));
        cache.insert(bits, pair.clone());
        Ok(pair)
    }
}

fn key_material(len: usize, salt: u8) -> Vec<u8> {
    (0..len).map(|i| (i as u8).wrapping_mul(31).wrapping_add(salt) ^ 0x5c).collect()
}

fn crypto_err(spec: &PrimitiveSpec, e: impl std::fmt::Display) -> BackendError {
    BackendError::Crypto { spec: spec.to_string(), detail: e.to_string() }
}

type StreamFn = fn(&[u8], &[u8], &mut [u8]);

/// ECB, CBC and CFB are generic over the cipher; the OFB and CTR keystreams
/// carry block-size bounds that are easier to satisfy per concrete cipher.
fn block_mode<C>(
    spec: &PrimitiveSpec,
    mode: Mode,
    encrypt: bool,
    data: &[u8],
    (ofb, ctr): (StreamFn, StreamFn),
) -> Result<Vec<u8>, BackendError>
where
    C: BlockCipher + BlockEncryptMut + BlockDecryptMut + KeyInit,
{
    let key = key_material(spec.key_bits as usize / 8, 0x11);
    let iv = key_material(C::block_size(), 0x77);
    let err = |e: &dyn std::fmt::Display| crypto_err(spec, e);
    let out = match (mode, encrypt) {
        (Mode::Ecb, true) => ecb::Encryptor::<C>::new_from_slice(&key)
            .map_err(|e| err(&e))?
            .encrypt_padded_vec_mut::<Pkcs7>(data),
        (Mode::Ecb, false) => ecb::Decryptor::<C>::new_from_slice(&key)
            .map_err(|e| err(&e))?
            .decrypt_padded_vec_mut::<Pkcs7>(data)
            .map_err(|e| err(&e))?,
        (Mode::Cbc, true) => cbc::Encryptor::<C>::new_from_slices(&key, &iv)
            .map_err(|e| err(&e))?
            .encrypt_padded_vec_mut::<Pkcs7>(data),
        (Mode::Cbc, false) => cbc::Decryptor::<C>::new_from_slices(&key, &iv)
            .map_err(|e| err(&e))?
            .decrypt_padded_vec_mut::<Pkcs7>(data)
            .map_err(|e| err(&e))?,
        (Mode::Cfb, enc) => {
            let mut buf = data.to_vec();
            if enc {
                cfb_mode::Encryptor::<C>::new_from_slices(&key, &iv).map_err(|e| err(&e))?.encrypt(&mut buf);
            } else {
                cfb_mode::Decryptor::<C>::new_from_slices(&key, &iv).map_err(|e| err(&e))?.decrypt(&mut buf);
            }
            buf
        }
        (Mode::Ofb, _) => {
            let mut buf = data.to_vec();
            ofb(&key, &iv, &mut buf);
            buf
        }
        (Mode::Ctr, _) => {
            let mut buf = data.to_vec();
            ctr(&key, &iv, &mut buf);
            buf
        }
    };
    Ok(out)
}

macro_rules! streams {
    ($cipher:ty, $ctr:ident) => {
        (
            |key: &[u8], iv: &[u8], buf: &mut [u8]| {
                ofb::Ofb::<$cipher>::new_from_slices(key, iv).expect("key and iv sized by caller").apply_keystream(buf)
            },
            |key: &[u8], iv: &[u8], buf: &mut [u8]| {
                ctr::$ctr::<$cipher>::new_from_slices(key, iv).expect("key and iv sized by caller").apply_keystream(buf)
            },
        )
    };
}

fn symmetric(spec: &PrimitiveSpec, encrypt: bool, data: &[u8]) -> Result<Vec<u8>, BackendError> {
    let mode = spec.mode.ok_or_else(|| crypto_err(spec, "missing mode"))?;
    match (spec.algorithm.as_str(), spec.key_bits) {
        ("aes", 128) => block_mode::<aes::Aes128>(spec, mode, encrypt, data, streams!(aes::Aes128, Ctr128BE)),
        ("aes", 192) => block_mode::<aes::Aes192>(spec, mode, encrypt, data, streams!(aes::Aes192, Ctr128BE)),
        ("aes", 256) => block_mode::<aes::Aes256>(spec, mode, encrypt, data, streams!(aes::Aes256, Ctr128BE)),
        ("des", 64) => block_mode::<des::Des>(spec, mode, encrypt, data, streams!(des::Des, Ctr64BE)),
        ("3des", 192) => {
            block_mode::<des::TdesEde3>(spec, mode, encrypt, data, streams!(des::TdesEde3, Ctr64BE))
        }
        _ => Err(crypto_err(spec, "no cipher for this algorithm/key size")),
    }
}

impl Backend for RustCryptoBackend {
    fn id(&self) -> &str {
        Self::ID
    }

    fn capabilities(&self) -> &Capabilities {
        &self.caps
    }

    fn sym_encrypt(&mut self, spec: &PrimitiveSpec, payload: &[u8]) -> Result<Vec<u8>, BackendError> {
        self.caps.check(spec)?;
        symmetric(spec, true, payload)
    }

    fn sym_decrypt(&mut self, spec: &PrimitiveSpec, ciphertext: &[u8]) -> Result<Vec<u8>, BackendError> {
        self.caps.check(spec)?;
        symmetric(spec, false, ciphertext)
    }

    fn hash(&mut self, spec: &PrimitiveSpec, payload: &[u8]) -> Result<Vec<u8>, BackendError> {
        self.caps.check(spec)?;
        Ok(match spec.algorithm.as_str() {
            "md4" => md4::Md4::digest(payload).to_vec(),
            "md5" => md5::Md5::digest(payload).to_vec(),
            "sha1" => sha1::Sha1::digest(payload).to_vec(),
            "sha256" => sha2::Sha256::digest(payload).to_vec(),
            "sha512" => sha2::Sha512::digest(payload).to_vec(),
            _ => return Err(crypto_err(spec, "no digest for this algorithm")),
        })
    }

    fn asym_encrypt(&mut self, spec: &PrimitiveSpec, payload: &[u8]) -> Result<Vec<u8>, BackendError> {
        self.caps.check_payload(spec, payload.len())?;
        let keys = Self::rsa_key(spec.key_bits)?;
        keys.1.encrypt(&mut self.rng, Pkcs1v15Encrypt, payload).map_err(|e| crypto_err(spec, e))
    }

    fn asym_decrypt(&mut self, spec: &PrimitiveSpec, ciphertext: &[u8]) -> Result<Vec<u8>, BackendError> {
        self.caps.check(spec)?;
        let keys = Self::rsa_key(spec.key_bits)?;
        keys.0.decrypt(Pkcs1v15Encrypt, ciphertext).map_err(|e| crypto_err(spec, e))
    }

    fn known_digests(&self) -> Vec<(PrimitiveSpec, Vec<u8>, Vec<u8>)> {
        let hex = |s: &str| -> Vec<u8> {
            (0..s.len()).step_by(2).map(|i| u8::from_str_radix(&s[i..i + 2], 16).expect("hex")).collect()
        };
        vec![
            (PrimitiveSpec::hash("sha1"), vec![], hex("da39a3ee5e6b4b0d3255bfef95601890afd80709")),
            (PrimitiveSpec::hash("sha1"), b"abc".to_vec(), hex("a9993e364706816aba3e25717850c26c9cd0d89d")),
            (
                PrimitiveSpec::hash("sha256"),
                vec![],
                hex("e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"),
            ),
            (PrimitiveSpec::hash("md5"), vec![], hex("d41d8cd98f00b204e9800998ecf8427e")),
            (PrimitiveSpec::hash("md4"), vec![], hex("31d6cfe0d16ae931b73c59d7e0c089c0")),
        ]
    }
}
