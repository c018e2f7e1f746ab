//! Binary embedding store.
//!
//! Little-endian layout, no padding:
//!
//! ```text
//! magic "XLEL" | version u32 = 1 | dim u32 | count u64
//! count x ( key_len u16 | key utf-8 | dim x f32 )
//! ```
//!
//! Records are written in ascending byte order of their keys.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const STORE_MAGIC: &[u8; 4] = b"XLEL";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    records: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("invalid store dim {dim}")));
        }
        Ok(EmbeddingStore {
            dim,
            records: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.records.get(key).map(Vec::as_slice)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    /// Inserts or replaces a vector.
    pub fn insert(&mut self, key: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let key = key.into();
        if key.len() > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("key of {} bytes is too long", key.len())));
        }
        if vector.len() != self.dim {
            return Err(Error::DimMismatch(format!(
                "vector for {key:?} has {} components, store dim is {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("vector for {key:?} is not finite")));
        }
        self.records.insert(key, vector);
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self
            .records
            .keys()
            .map(|k| 2 + k.len() + 4 * self.dim)
            .sum();
        let mut out = Vec::with_capacity(20 + payload);
        out.extend_from_slice(STORE_MAGIC);
        out.extend_from_slice(&STORE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for (key, vector) in &self.records {
            out.extend_from_slice(&(key.len() as u16).to_le_bytes());
            out.extend_from_slice(key.as_bytes());
            for v in vector {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != STORE_MAGIC {
            return Err(Error::Format("bad magic, not an embedding store".into()));
        }
        let version = r.u32()?;
        if version != STORE_VERSION {
            return Err(Error::Format(format!("unsupported store version {version}")));
        }
        let dim = r.u32()? as usize;
        let count = r.u64()?;
        let mut store = EmbeddingStore::new(dim).map_err(|e| Error::Format(e.to_string()))?;
        let mut prev: Option<&[u8]> = None;
        for _ in 0..count {
            let key_len = r.u16()? as usize;
            let key_bytes = r.take(key_len)?;
            if let Some(p) = prev {
                if p == key_bytes {
                    return Err(Error::DuplicateKey(String::from_utf8_lossy(key_bytes).into_owned()));
                }
                if p > key_bytes {
                    return Err(Error::Format("keys are not in ascending order".into()));
                }
            }
            prev = Some(key_bytes);
            let key = std::str::from_utf8(key_bytes)
                .map_err(|_| Error::Format("key is not valid utf-8".into()))?;
            let raw = r.take(4 * dim)?;
            let vector: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            store.insert(key, vector)?;
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after last record",
                bytes.len() - r.pos
            )));
        }
        Ok(store)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub(crate) struct ByteReader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated file at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    pub fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }
}
