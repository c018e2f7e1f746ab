use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::BranchMask;
use super::params::{Dense, RankerParams};
use crate::encoder::RepresentationBundle;
use crate::error::{Error, Result};

pub enum Mode<'a> {
    Infer,
    /// Inverted dropout on every hidden activation.
    Train { dropout: f64, rng: &'a mut ChaCha8Rng },
}

impl Mode<'_> {
    fn reborrow(&mut self) -> Mode<'_> {
        match self {
            Mode::Infer => Mode::Infer,
            Mode::Train { dropout, rng } => Mode::Train {
                dropout: *dropout,
                rng,
            },
        }
    }
}

/// Inputs of one hidden layer and the derivative of its output w.r.t. its
/// pre-activation (ReLU indicator times dropout scale).
struct HiddenCache {
    input: Array2<f64>,
    gate: Array2<f64>,
}

fn affine(x: &ArrayView2<f64>, layer: &Dense) -> Array2<f64> {
    x.dot(&layer.weight) + &layer.bias
}

fn hidden(x: Array2<f64>, layer: &Dense, mode: &mut Mode<'_>) -> (Array2<f64>, HiddenCache) {
    let z = affine(&x.view(), layer);
    let mut gate = z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    if let Mode::Train { dropout, rng } = mode {
        if *dropout > 0.0 {
            let keep = 1.0 - *dropout;
            let scale = 1.0 / keep;
            gate.mapv_inplace(|g| if rng.gen::<f64>() < keep { g * scale } else { 0.0 });
        }
    }
    let out = &z * &gate;
    (out, HiddenCache { input: x, gate })
}

fn hidden_stack(x: Array2<f64>, layers: &[Dense], mode: &mut Mode<'_>) -> (Array2<f64>, Vec<HiddenCache>) {
    let mut caches = Vec::with_capacity(layers.len());
    let mut h = x;
    for l in layers {
        let (out, cache) = hidden(h, l, mode);
        caches.push(cache);
        h = out;
    }
    (h, caches)
}

/// Backpropagates `d_out` through hidden layers, accumulating into `grads`;
/// returns the gradient w.r.t. the stack input.
fn hidden_backward(layers: &[Dense], caches: &[HiddenCache], mut d_out: Array2<f64>, grads: &mut [Dense]) -> Array2<f64> {
    for i in (0..layers.len()).rev() {
        let dz = &d_out * &caches[i].gate;
        grads[i].weight += &caches[i].input.t().dot(&dz);
        grads[i].bias += &dz.sum_axis(Axis(0));
        d_out = dz.dot(&layers[i].weight.t());
    }
    d_out
}

fn min_abs_preactivation(layers: &[Dense], caches: &[HiddenCache]) -> f64 {
    layers
        .iter()
        .zip(caches)
        .map(|(l, c)| affine(&c.input.view(), l).iter().fold(f64::INFINITY, |m, z| m.min(z.abs())))
        .fold(f64::INFINITY, f64::min)
}

/// Row-stacked branch inputs for a batch of (mention, entity) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    pub name: Array2<f64>,
    pub context: Array2<f64>,
    pub types: Array2<f64>,
}

impl PairBatch {
    pub fn from_pairs(pairs: &[(&RepresentationBundle, &RepresentationBundle)]) -> Result<Self> {
        let first = pairs
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty pair batch".into()))?;
        let widths = (
            first.0.name.len() + first.1.name.len(),
            first.0.context.len() + first.1.context.len(),
            first.0.types.len() + first.1.types.len(),
        );
        let mut name = Array2::zeros((pairs.len(), widths.0));
        let mut context = Array2::zeros((pairs.len(), widths.1));
        let mut types = Array2::zeros((pairs.len(), widths.2));
        for (r, (m, e)) in pairs.iter().enumerate() {
            let row_widths = (
                m.name.len() + e.name.len(),
                m.context.len() + e.context.len(),
                m.types.len() + e.types.len(),
            );
            if row_widths != widths {
                return Err(Error::DimMismatch(format!(
                    "pair {r} has widths {row_widths:?}, batch has {widths:?}"
                )));
            }
            fill_row(&mut name, r, &m.name, &e.name);
            fill_row(&mut context, r, &m.context, &e.context);
            fill_row(&mut types, r, &m.types, &e.types);
        }
        Ok(PairBatch { name, context, types })
    }

    pub fn rows(&self) -> usize {
        self.name.nrows()
    }
}

fn fill_row(dst: &mut Array2<f64>, r: usize, a: &[f32], b: &[f32]) {
    let mut row = dst.row_mut(r);
    for (slot, v) in row.iter_mut().zip(a.iter().chain(b)) {
        *slot = *v as f64;
    }
}

pub struct ForwardTrace {
    mask: BranchMask,
    name: Vec<HiddenCache>,
    context: Vec<HiddenCache>,
    types: Vec<HiddenCache>,
    head: Vec<HiddenCache>,
    /// Input of the scalar output layer.
    last_input: Array2<f64>,
    scores: Array1<f64>,
}

impl ForwardTrace {
    pub fn scores(&self) -> &Array1<f64> {
        &self.scores
    }

    /// Smallest |pre-activation| over all active ReLU units: the distance to
    /// the nearest point where the network is not differentiable.
    pub fn kink_distance(&self, p: &RankerParams) -> f64 {
        let n_hidden = p.head.len() - 1;
        [
            min_abs_preactivation(&p.name, &self.name),
            min_abs_preactivation(&p.context, &self.context),
            min_abs_preactivation(&p.types, &self.types),
            min_abs_preactivation(&p.head[..n_hidden], &self.head),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }
}

fn check_dims(p: &RankerParams, batch: &PairBatch) -> Result<()> {
    let d = p.input_dims();
    let got = (batch.name.ncols(), batch.context.ncols(), batch.types.ncols());
    if got != (d.name, d.context, d.types) {
        return Err(Error::DimMismatch(format!(
            "inputs {got:?} do not match network inputs ({}, {}, {})",
            d.name, d.context, d.types
        )));
    }
    Ok(())
}

/// Scores every row of `batch`; masked branches contribute zeros.
pub fn forward(p: &RankerParams, batch: &PairBatch, mask: BranchMask, mut mode: Mode<'_>) -> Result<ForwardTrace> {
    check_dims(p, batch)?;
    let rows = batch.rows();
    let branch = |on: bool, x: &Array2<f64>, layers: &[Dense], mode: &mut Mode<'_>| {
        if on {
            hidden_stack(x.clone(), layers, mode)
        } else {
            (Array2::zeros((rows, layers.last().unwrap().output_dim())), Vec::new())
        }
    };
    let (rs, name) = branch(mask.use_name, &batch.name, &p.name, &mut mode);
    let (rc, context) = branch(mask.use_context, &batch.context, &p.context, &mut mode);
    let (rt, types) = branch(mask.use_type, &batch.types, &p.types, &mut mode);
    let joined = ndarray::concatenate(Axis(1), &[rs.view(), rc.view(), rt.view()]).expect("equal row counts");
    let n_hidden = p.head.len() - 1;
    let (last_input, head) = hidden_stack(joined, &p.head[..n_hidden], &mut mode.reborrow());
    let out = affine(&last_input.view(), &p.head[n_hidden]);
    let scores = out.column(0).mapv(f64::tanh);
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite score".into()));
    }
    Ok(ForwardTrace {
        mask,
        name,
        context,
        types,
        head,
        last_input,
        scores,
    })
}

/// Gradient of `sum_i d_scores[i] * score_i` w.r.t. every parameter.
pub fn backward(p: &RankerParams, trace: &ForwardTrace, d_scores: &Array1<f64>) -> RankerParams {
    let mut g = p.zeros_like();
    let n_hidden = p.head.len() - 1;
    let dz = (d_scores * &trace.scores.mapv(|s| 1.0 - s * s)).insert_axis(Axis(1));
    g.head[n_hidden].weight += &trace.last_input.t().dot(&dz);
    g.head[n_hidden].bias += &dz.sum_axis(Axis(0));
    let d_last = dz.dot(&p.head[n_hidden].weight.t());
    let d_joined = hidden_backward(&p.head[..n_hidden], &trace.head, d_last, &mut g.head[..n_hidden]);

    let wn = p.name.last().unwrap().output_dim();
    let wc = p.context.last().unwrap().output_dim();
    if trace.mask.use_name {
        let d = d_joined.slice(s![.., ..wn]).to_owned();
        hidden_backward(&p.name, &trace.name, d, &mut g.name);
    }
    if trace.mask.use_context {
        let d = d_joined.slice(s![.., wn..wn + wc]).to_owned();
        hidden_backward(&p.context, &trace.context, d, &mut g.context);
    }
    if trace.mask.use_type {
        let d = d_joined.slice(s![.., wn + wc..]).to_owned();
        hidden_backward(&p.types, &trace.types, d, &mut g.types);
    }
    g
}

/// Infer-mode scores in `(-1, 1)`; in f64 the Tanh output rounds to exactly
/// +-1 once the final pre-activation exceeds about 19 in magnitude.
pub fn score_pairs(
    p: &RankerParams,
    pairs: &[(&RepresentationBundle, &RepresentationBundle)],
    mask: BranchMask,
) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let batch = PairBatch::from_pairs(pairs)?;
    Ok(forward(p, &batch, mask, Mode::Infer)?.scores.to_vec())
}

pub fn score(p: &RankerParams, mention: &RepresentationBundle, entity: &RepresentationBundle, mask: BranchMask) -> Result<f64> {
    Ok(score_pairs(p, &[(mention, entity)], mask)?[0])
}

/// Name branch followed by the matcher head; rows are `[source ; target]`.
pub struct MatchTrace {
    name: Vec<HiddenCache>,
    last_input: Array2<f64>,
    scores: Array1<f64>,
}

impl MatchTrace {
    pub fn scores(&self) -> &Array1<f64> {
        &self.scores
    }

    pub fn kink_distance(&self, p: &RankerParams) -> f64 {
        min_abs_preactivation(&p.name, &self.name)
    }
}

pub fn match_forward(p: &RankerParams, names: &Array2<f64>, mut mode: Mode<'_>) -> Result<MatchTrace> {
    if names.ncols() != p.input_dims().name {
        return Err(Error::DimMismatch(format!(
            "name-match inputs have {} columns, network expects {}",
            names.ncols(),
            p.input_dims().name
        )));
    }
    let (last_input, name) = hidden_stack(names.clone(), &p.name, &mut mode);
    let scores = affine(&last_input.view(), &p.matcher).column(0).mapv(f64::tanh);
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite name-match score".into()));
    }
    Ok(MatchTrace {
        name,
        last_input,
        scores,
    })
}

/// Gradient touching only the name branch and the matcher head.
pub fn match_backward(p: &RankerParams, trace: &MatchTrace, d_scores: &Array1<f64>) -> RankerParams {
    let mut g = p.zeros_like();
    let dz = (d_scores * &trace.scores.mapv(|s| 1.0 - s * s)).insert_axis(Axis(1));
    g.matcher.weight += &trace.last_input.t().dot(&dz);
    g.matcher.bias += &dz.sum_axis(Axis(0));
    let d = dz.dot(&p.matcher.weight.t());
    hidden_backward(&p.name, &trace.name, d, &mut g.name);
    g
}
