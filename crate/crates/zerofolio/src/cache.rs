//! Persistent embedding cache.
//!
//! One binary file per (serialized text, model) pair under
//! `store/<hex(sha256(text))>/<model_id>.vec`:
//! a little-endian `u32` dimension count, the components as little-endian
//! `f64`, and a little-endian CRC32 of everything before it. Writes go
//! through a temp file and rename, so concurrent embedders sharing a store
//! never observe torn records.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;
use zerofolio_core::EmbeddingVector;

/// Identifies one cached embedding.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CacheKey {
    /// SHA-256 of the serialized text.
    pub content_hash: [u8; 32],
    /// Embedding model identifier.
    pub model_id: String,
}

impl CacheKey {
    /// Key for a serialized text under a model.
    pub fn for_text(text: &str, model_id: &str) -> Self {
        let digest = Sha256::digest(text.as_bytes());
        Self { content_hash: digest.into(), model_id: model_id.to_string() }
    }

    /// Lowercase hex of the content hash.
    pub fn content_hex(&self) -> String {
        let mut out = String::with_capacity(64);
        for b in self.content_hash {
            write!(out, "{b:02x}").unwrap();
        }
        out
    }

    /// Rebuilds a key from its hex content hash (as stored in trained state).
    pub fn from_hex(hex: &str, model_id: &str) -> Option<Self> {
        if hex.len() != 64 {
            return None;
        }
        let mut content_hash = [0u8; 32];
        for (i, chunk) in hex.as_bytes().chunks(2).enumerate() {
            let s = std::str::from_utf8(chunk).ok()?;
            content_hash[i] = u8::from_str_radix(s, 16).ok()?;
        }
        Some(Self { content_hash, model_id: model_id.to_string() })
    }
}

/// Cache failures.
#[derive(Debug, Error)]
pub enum CacheError {
    /// A record failed its checksum or shape validation.
    #[error("corrupt cache record {0}")]
    Corrupt(String),
    /// IO failure in the store.
    #[error("cache store {path}: {source}")]
    Io {
        /// Path involved.
        path: String,
        /// The underlying IO error.
        #[source]
        source: std::io::Error,
    },
}

const CRC_TABLE: [u32; 256] = build_crc_table();

const fn build_crc_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u32;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 1 != 0 { (crc >> 1) ^ 0xEDB8_8320 } else { crc >> 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

/// CRC32 (IEEE 802.3 polynomial, as in zip/zlib).
pub fn crc32(data: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &b in data {
        crc = (crc >> 8) ^ CRC_TABLE[((crc ^ u32::from(b)) & 0xFF) as usize];
    }
    !crc
}

/// On-disk location of a key within a store.
pub fn cache_path(store: &Path, key: &CacheKey) -> PathBuf {
    store
        .join(key.content_hex())
        .join(format!("{}.vec", key.model_id))
}

fn io_error(path: &Path, source: std::io::Error) -> CacheError {
    CacheError::Io { path: path.display().to_string(), source }
}

fn encode(vec: &EmbeddingVector) -> Vec<u8> {
    let values = vec.values();
    let mut buf = Vec::with_capacity(4 + values.len() * 8 + 4);
    buf.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let checksum = crc32(&buf);
    buf.extend_from_slice(&checksum.to_le_bytes());
    buf
}

fn decode(path: &Path, bytes: &[u8]) -> Result<EmbeddingVector, CacheError> {
    let corrupt = || CacheError::Corrupt(path.display().to_string());
    if bytes.len() < 8 {
        return Err(corrupt());
    }
    let (payload, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    if crc32(payload) != stored {
        return Err(corrupt());
    }
    let dim = u32::from_le_bytes(payload[..4].try_into().unwrap()) as usize;
    let body = &payload[4..];
    if body.len() != dim * 8 {
        return Err(corrupt());
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingVector::new(values).map_err(|_| corrupt())
}

/// Fetches a record; `Ok(None)` when the key has never been stored.
pub fn cache_get(key: &CacheKey, store: &Path) -> Result<Option<EmbeddingVector>, CacheError> {
    let path = cache_path(store, key);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_error(&path, e)),
    };
    decode(&path, &bytes).map(Some)
}

/// Stores a record atomically (write to temp file, then rename).
pub fn cache_put(key: &CacheKey, vec: &EmbeddingVector, store: &Path) -> Result<(), CacheError> {
    let path = cache_path(store, key);
    let dir = path.parent().expect("cache path always has a parent");
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(dir, e))?;
    tmp.write_all(&encode(vec)).map_err(|e| io_error(&path, e))?;
    tmp.persist(&path)
        .map_err(|e| io_error(&path, e.error))?;
    Ok(())
}
