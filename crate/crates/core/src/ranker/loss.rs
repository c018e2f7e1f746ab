use ndarray::{Array1, Array2};

use super::config::BranchMask;
use super::network::{backward, forward, match_backward, match_forward, Mode, PairBatch};
use super::params::RankerParams;
use crate::encoder::RepresentationBundle;
use crate::error::{Error, Result};

/// `max(0, margin - (pos - max(negs)))`.
pub fn hinge_loss(pos: f64, negs: &[f64], margin: f64) -> Result<f64> {
    if negs.is_empty() {
        return Err(Error::InvalidArgument("hinge loss needs at least one negative".into()));
    }
    let hardest = negs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((margin - (pos - hardest)).max(0.0))
}

/// Index of the first maximum.
pub fn first_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub struct TrainingExample<'a> {
    pub mention: &'a RepresentationBundle,
    pub positive: &'a RepresentationBundle,
    pub negatives: Vec<&'a RepresentationBundle>,
}

/// Per-row upstream gradient of the batch-mean hinge loss. The subgradient at
/// the kink is zero; only the positive and the hardest negative receive gradient.
fn hinge_upstream(scores: &Array1<f64>, groups: &[usize], margin: f64) -> Result<(f64, Array1<f64>)> {
    let mut d = Array1::zeros(scores.len());
    let inv = 1.0 / groups.len() as f64;
    let mut total = 0.0;
    let mut start = 0;
    for &n_neg in groups {
        let pos = scores[start];
        let negs = scores.slice(ndarray::s![start + 1..start + 1 + n_neg]).to_vec();
        let l = hinge_loss(pos, &negs, margin)?;
        if l > 0.0 {
            d[start] -= inv;
            d[start + 1 + first_argmax(&negs)] += inv;
        }
        total += l;
        start += 1 + n_neg;
    }
    Ok((total * inv, d))
}

/// Mean hinge loss over `examples` and its gradient.
pub fn batch_loss_grad(
    p: &RankerParams,
    examples: &[TrainingExample<'_>],
    margin: f64,
    mask: BranchMask,
    mode: Mode<'_>,
) -> Result<(f64, RankerParams)> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("empty training batch".into()));
    }
    let mut pairs = Vec::new();
    let mut groups = Vec::with_capacity(examples.len());
    for ex in examples {
        if ex.negatives.is_empty() {
            return Err(Error::InvalidArgument("training example without negatives".into()));
        }
        pairs.push((ex.mention, ex.positive));
        pairs.extend(ex.negatives.iter().map(|n| (ex.mention, *n)));
        groups.push(ex.negatives.len());
    }
    let batch = PairBatch::from_pairs(&pairs)?;
    let trace = forward(p, &batch, mask, mode)?;
    let (loss, d) = hinge_upstream(trace.scores(), &groups, margin)?;
    Ok((loss, backward(p, &trace, &d)))
}

/// A source-language name, its English counterpart and sampled wrong names.
pub struct AuxExample<'a> {
    pub source: &'a [f32],
    pub positive: &'a [f32],
    pub negatives: Vec<&'a [f32]>,
}

/// Mean hinge loss of the name-match objective and its gradient.
pub fn aux_loss_grad(p: &RankerParams, examples: &[AuxExample<'_>], margin: f64, mode: Mode<'_>) -> Result<(f64, RankerParams)> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("empty name-match batch".into()));
    }
    let width = p.input_dims().name;
    let rows: usize = examples.iter().map(|e| 1 + e.negatives.len()).sum();
    let mut x = Array2::zeros((rows, width));
    let mut groups = Vec::with_capacity(examples.len());
    let mut r = 0;
    for ex in examples {
        if ex.negatives.is_empty() {
            return Err(Error::InvalidArgument("name-match example without negatives".into()));
        }
        for target in std::iter::once(&ex.positive).chain(ex.negatives.iter()) {
            if ex.source.len() + target.len() != width {
                return Err(Error::DimMismatch(format!(
                    "name pair has width {}, network expects {width}",
                    ex.source.len() + target.len()
                )));
            }
            for (slot, v) in x.row_mut(r).iter_mut().zip(ex.source.iter().chain(target.iter())) {
                *slot = *v as f64;
            }
            r += 1;
        }
        groups.push(ex.negatives.len());
    }
    let trace = match_forward(p, &x, mode)?;
    let (loss, d) = hinge_upstream(trace.scores(), &groups, margin)?;
    Ok((loss, match_backward(p, &trace, &d)))
}
