use crate::error::{Error, Result};

const BOS: u8 = 0x02;
const EOS: u8 = 0x03;

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_trigram(trigram: &[u8], seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(trigram) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix(h)
}

/// Signed feature hashing of byte trigrams, L2-normalized.
///
/// The UTF-8 bytes are framed by one start and one end boundary byte; each
/// trigram of the framed sequence adds +1 or -1 at a hashed coordinate.
/// Empty text maps to the zero vector.
pub fn test_encode(text: &str, dim: usize, seed: u64) -> Result<Vec<f32>> {
    if dim < 8 {
        return Err(Error::InvalidArgument(format!("encoder dim must be at least 8, got {dim}")));
    }
    let mut acc = vec![0.0f64; dim];
    if text.is_empty() {
        return Ok(vec![0.0; dim]);
    }
    let mut framed = Vec::with_capacity(text.len() + 2);
    framed.push(BOS);
    framed.extend_from_slice(text.as_bytes());
    framed.push(EOS);
    for tri in framed.windows(3) {
        let h = hash_trigram(tri, seed);
        let idx = (h % dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        acc[idx] += sign;
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(vec![0.0; dim]);
    }
    Ok(acc.into_iter().map(|v| (v / norm) as f32).collect())
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
