use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::params::{Dense, RankerParams};
use crate::encoder::ByteReader;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"XLPR";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Layout: magic, version u32, tensor count u64, then per tensor
/// `name_len u16, name, rank u8, dims u32 x rank, row-major f32 payload`.
/// All integers little-endian; values are rounded to binary32.
pub fn checkpoint_bytes(p: &RankerParams) -> Vec<u8> {
    let tensors = p.named_tensors();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
    for (name, dims, values) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(dims.len() as u8);
        for d in &dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in values {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

struct Tensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

fn take_layer(tensors: &mut BTreeMap<String, Tensor>, base: &str) -> Result<Option<Dense>> {
    let (wk, bk) = (format!("{base}.weight"), format!("{base}.bias"));
    let Some(w) = tensors.remove(&wk) else {
        return if tensors.contains_key(&bk) {
            Err(Error::Format(format!("tensor {bk} without {wk}")))
        } else {
            Ok(None)
        };
    };
    let b = tensors.remove(&bk).ok_or_else(|| Error::Format(format!("missing tensor {bk}")))?;
    if w.dims.len() != 2 || b.dims.len() != 1 || w.dims[1] != b.dims[0] {
        return Err(Error::Format(format!("{base}: weight {:?} and bias {:?} disagree", w.dims, b.dims)));
    }
    let weight = Array2::from_shape_vec((w.dims[0], w.dims[1]), w.values).expect("length checked on read");
    Ok(Some(Dense {
        weight,
        bias: Array1::from(b.values),
    }))
}

fn take_stack(tensors: &mut BTreeMap<String, Tensor>, prefix: &str) -> Result<Vec<Dense>> {
    let mut layers = Vec::new();
    while let Some(l) = take_layer(tensors, &format!("{prefix}.{}", layers.len()))? {
        layers.push(l);
    }
    Ok(layers)
}

pub fn params_from_bytes(bytes: &[u8]) -> Result<RankerParams> {
    let mut r = ByteReader { bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("bad magic, not a ranker checkpoint".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = r.u64()?;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Format("tensor name is not valid utf-8".into()))?
            .to_string();
        let rank = r.u8()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, d| acc.checked_mul(*d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format(format!("tensor {name} is too large")))?;
        let values = r
            .take(n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        if tensors.insert(name.clone(), Tensor { dims, values }).is_some() {
            return Err(Error::DuplicateKey(name));
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after last tensor", bytes.len() - r.pos)));
    }
    let name = take_stack(&mut tensors, "name")?;
    let context = take_stack(&mut tensors, "context")?;
    let types = take_stack(&mut tensors, "types")?;
    let head = take_stack(&mut tensors, "head")?;
    let matcher = take_layer(&mut tensors, "matcher")?.ok_or_else(|| Error::Format("missing matcher tensors".into()))?;
    if let Some(extra) = tensors.keys().next() {
        return Err(Error::Format(format!("unexpected tensor {extra}")));
    }
    let p = RankerParams {
        name,
        context,
        types,
        head,
        matcher,
    };
    p.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(p)
}

pub fn write_checkpoint(path: &Path, p: &RankerParams) -> Result<()> {
    fs::write(path, checkpoint_bytes(p)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<RankerParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    params_from_bytes(&bytes)
}
