use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use xlel::encoder::RepresentationBundle;
use xlel::ranker::{
    aux_loss_grad, backward, batch_loss_grad, forward, hinge_loss, match_forward, score_pairs, AuxExample,
    BranchMask, InputDims, LayerSizes, Mode, PairBatch, ParamGroup, RankerParams, TrainingExample,
};

const DRAWS: usize = 120;
const H: f64 = 1e-6;
/// Denominator floor: central differences at `H` carry ~1e-10 absolute
/// rounding error, so coordinates below the floor are judged absolutely.
const FLOOR: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;
/// Draws whose nearest kink (ReLU, hinge, max over negatives) is closer than
/// this are redrawn; the stencil must lie in one differentiable piece.
const CLEARANCE: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn widths(rng: &mut ChaCha8Rng, min_layers: usize) -> Vec<usize> {
    (0..rng.gen_range(min_layers..=2)).map(|_| rng.gen_range(2..=6)).collect()
}

pub fn random_sizes(rng: &mut ChaCha8Rng) -> LayerSizes {
    LayerSizes {
        name: widths(rng, 1),
        context: widths(rng, 1),
        types: widths(rng, 1),
        head: widths(rng, 0),
    }
}

pub fn random_mask(rng: &mut ChaCha8Rng) -> BranchMask {
    loop {
        if let Ok(m) = BranchMask::new(rng.gen(), rng.gen(), rng.gen()) {
            return m;
        }
    }
}

pub fn random_params(rng: &mut ChaCha8Rng, sizes: &LayerSizes, dims: InputDims) -> RankerParams {
    let mut p = RankerParams::init(sizes, dims, rng.gen()).unwrap();
    // Non-zero biases so every term of the gradient is exercised.
    for s in p.slices_mut(&ParamGroup::ALL) {
        if s.len() <= 6 {
            for v in s.iter_mut() {
                *v = rng.gen_range(-0.3..0.3);
            }
        }
    }
    p
}

pub fn random_bundle(rng: &mut ChaCha8Rng, dim: usize, n_types: usize) -> RepresentationBundle {
    let mut v = |n: usize| (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect::<Vec<_>>();
    RepresentationBundle {
        name: v(dim),
        context: v(dim),
        types: (0..n_types).map(|_| if rng.gen_bool(0.4) { 1.0 } else { 0.0 }).collect(),
    }
}

/// Flattened analytic gradient vs central differences of `objective`.
fn compare(params: &RankerParams, grads: &RankerParams, objective: &dyn Fn(&RankerParams) -> f64) -> (f64, usize) {
    let analytic: Vec<f64> = grads.slices(&ParamGroup::ALL).concat();
    let mut worst: f64 = 0.0;
    let mut coord = 0;
    let n_tensors = params.slices(&ParamGroup::ALL).len();
    for t in 0..n_tensors {
        let len = params.slices(&ParamGroup::ALL)[t].len();
        for i in 0..len {
            let mut plus = params.clone();
            plus.slices_mut(&ParamGroup::ALL)[t][i] += H;
            let mut minus = params.clone();
            minus.slices_mut(&ParamGroup::ALL)[t][i] -= H;
            let numeric = (objective(&plus) - objective(&minus)) / (2.0 * H);
            worst = worst.max(relative_error(analytic[coord], numeric));
            coord += 1;
        }
    }
    (worst, coord)
}

struct RankingDraw {
    params: RankerParams,
    mask: BranchMask,
    mentions: Vec<RepresentationBundle>,
    /// Positive first.
    entities: Vec<Vec<RepresentationBundle>>,
    margin: f64,
}

impl RankingDraw {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let sizes = random_sizes(rng);
        let dim = rng.gen_range(1..=4);
        let (mt, et) = (rng.gen_range(0..=3), rng.gen_range(0..=3));
        let dims = InputDims::from_features(dim, mt, et);
        let params = random_params(rng, &sizes, dims);
        let n_ex = rng.gen_range(1..=4);
        let mentions: Vec<_> = (0..n_ex).map(|_| random_bundle(rng, dim, mt)).collect();
        let entities = (0..n_ex)
            .map(|_| (0..rng.gen_range(2..=5)).map(|_| random_bundle(rng, dim, et)).collect())
            .collect();
        RankingDraw {
            params,
            mask: random_mask(rng),
            mentions,
            entities,
            margin: rng.gen_range(0.1..2.0),
        }
    }

    fn examples(&self) -> Vec<TrainingExample<'_>> {
        self.mentions
            .iter()
            .zip(&self.entities)
            .map(|(m, es)| TrainingExample {
                mention: m,
                positive: &es[0],
                negatives: es[1..].iter().collect(),
            })
            .collect()
    }

    fn pairs(&self) -> Vec<(&RepresentationBundle, &RepresentationBundle)> {
        self.mentions
            .iter()
            .zip(&self.entities)
            .flat_map(|(m, es)| es.iter().map(move |e| (m, e)))
            .collect()
    }

    /// Loss computed from independently scored pairs.
    fn oracle_loss(&self, p: &RankerParams) -> f64 {
        let mut total = 0.0;
        for (m, es) in self.mentions.iter().zip(&self.entities) {
            let pairs: Vec<_> = es.iter().map(|e| (m, e)).collect();
            let s = score_pairs(p, &pairs, self.mask).unwrap();
            total += hinge_loss(s[0], &s[1..], self.margin).unwrap();
        }
        total / self.mentions.len() as f64
    }

    fn clear_of_kinks(&self) -> bool {
        let batch = PairBatch::from_pairs(&self.pairs()).unwrap();
        let trace = forward(&self.params, &batch, self.mask, Mode::Infer).unwrap();
        if trace.kink_distance(&self.params) < CLEARANCE {
            return false;
        }
        for (m, es) in self.mentions.iter().zip(&self.entities) {
            let pairs: Vec<_> = es.iter().map(|e| (m, e)).collect();
            let mut s = score_pairs(&self.params, &pairs, self.mask).unwrap();
            let pos = s.remove(0);
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if s.len() > 1 && s[0] - s[1] < CLEARANCE {
                return false;
            }
            if (self.margin - (pos - s[0])).abs() < CLEARANCE {
                return false;
            }
        }
        true
    }
}

fn ranking_hinge(rng: &mut ChaCha8Rng) -> (f64, usize, usize) {
    let mut redraws = 0;
    let d = loop {
        let d = RankingDraw::new(rng);
        if d.clear_of_kinks() {
            break d;
        }
        redraws += 1;
    };
    let (loss, grads) = batch_loss_grad(&d.params, &d.examples(), d.margin, d.mask, Mode::Infer).unwrap();
    assert!((loss - d.oracle_loss(&d.params)).abs() < 1e-12);
    let (worst, n) = compare(&d.params, &grads, &|p| d.oracle_loss(p));
    (worst, n, redraws)
}

/// A random linear functional of all scores, so every row carries gradient.
fn ranking_linear(rng: &mut ChaCha8Rng) -> (f64, usize, usize) {
    let mut redraws = 0;
    let d = loop {
        let d = RankingDraw::new(rng);
        let batch = PairBatch::from_pairs(&d.pairs()).unwrap();
        if forward(&d.params, &batch, d.mask, Mode::Infer).unwrap().kink_distance(&d.params) >= CLEARANCE {
            break d;
        }
        redraws += 1;
    };
    let batch = PairBatch::from_pairs(&d.pairs()).unwrap();
    let coef = Array1::from_shape_fn(batch.rows(), |_| rng.gen_range(-1.0..1.0));
    let trace = forward(&d.params, &batch, d.mask, Mode::Infer).unwrap();
    let grads = backward(&d.params, &trace, &coef);
    let objective = |p: &RankerParams| {
        forward(p, &batch, d.mask, Mode::Infer).unwrap().scores().dot(&coef)
    };
    let (worst, n) = compare(&d.params, &grads, &objective);
    (worst, n, redraws)
}

fn name_match(rng: &mut ChaCha8Rng) -> (f64, usize, usize) {
    let mut redraws = 0;
    loop {
        let sizes = random_sizes(rng);
        let dim = rng.gen_range(1..=4);
        let params = random_params(rng, &sizes, InputDims::from_features(dim, 1, 1));
        let margin = rng.gen_range(0.1..2.0);
        let vec = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect::<Vec<_>>();
        let mut groups: Vec<Vec<Vec<f32>>> = Vec::new();
        for _ in 0..rng.gen_range(1..=4) {
            let n = rng.gen_range(3..=6);
            groups.push((0..n).map(|_| vec(rng)).collect());
        }
        let examples: Vec<AuxExample<'_>> = groups
            .iter()
            .map(|g| AuxExample {
                source: &g[0],
                positive: &g[1],
                negatives: g[2..].iter().map(|v| v.as_slice()).collect(),
            })
            .collect();
        let rows = |ex: &AuxExample<'_>| {
            let targets: Vec<&[f32]> = std::iter::once(ex.positive).chain(ex.negatives.iter().copied()).collect();
            Array2::from_shape_fn((targets.len(), 2 * dim), |(r, c)| {
                if c < dim {
                    ex.source[c] as f64
                } else {
                    targets[r][c - dim] as f64
                }
            })
        };
        let oracle = |p: &RankerParams| {
            examples
                .iter()
                .map(|ex| {
                    let s = match_forward(p, &rows(ex), Mode::Infer).unwrap().scores().to_vec();
                    hinge_loss(s[0], &s[1..], margin).unwrap()
                })
                .sum::<f64>()
                / examples.len() as f64
        };
        let clear = examples.iter().all(|ex| {
            let t = match_forward(&params, &rows(ex), Mode::Infer).unwrap();
            let mut s = t.scores().to_vec();
            let pos = s.remove(0);
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            t.kink_distance(&params) >= CLEARANCE
                && (s.len() < 2 || s[0] - s[1] >= CLEARANCE)
                && (margin - (pos - s[0])).abs() >= CLEARANCE
        });
        if !clear {
            redraws += 1;
            continue;
        }
        let (loss, grads) = aux_loss_grad(&params, &examples, margin, Mode::Infer).unwrap();
        assert!((loss - oracle(&params)).abs() < 1e-12);
        for g in [ParamGroup::Context, ParamGroup::Types, ParamGroup::Head] {
            assert!(grads.slices(&[g]).iter().all(|s| s.iter().all(|v| *v == 0.0)));
        }
        let (worst, n) = compare(&params, &grads, &oracle);
        return (worst, n, redraws);
    }
}

pub fn gradient_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
    let mut worst: f64 = 0.0;
    let (mut coords, mut redraws) = (0, 0);
    for i in 0..DRAWS {
        let (w, n, r) = match i % 3 {
            0 => ranking_hinge(&mut rng),
            1 => ranking_linear(&mut rng),
            _ => name_match(&mut rng),
        };
        worst = worst.max(w);
        coords += n;
        redraws += r;
    }
    let detail = format!(
        "{DRAWS} draws, {coords} coordinates, max relative error {worst:.2e} (tol {TOLERANCE:.0e}), {redraws} redraws near kinks"
    );
    if worst < TOLERANCE {
        Ok(detail)
    } else {
        Err(detail)
    }
}
