use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::config::LayerSizes;
use crate::error::{Error, Result};

/// Affine layer `y = x W + b` with `W` stored input-major (in x out).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            weight: Array2::zeros((input, output)),
            bias: Array1::zeros(output),
        }
    }

    /// Uniform in `[-sqrt(6 / fan_in), sqrt(6 / fan_in)]`, zero bias.
    fn init(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = init_bound(input);
        Dense {
            weight: Array2::from_shape_fn((input, output), |_| rng.gen_range(-bound..=bound)),
            bias: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.ncols()
    }
}

pub fn init_bound(fan_in: usize) -> f64 {
    (6.0 / fan_in.max(1) as f64).sqrt()
}

/// Widths of the three branch inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputDims {
    pub name: usize,
    pub context: usize,
    pub types: usize,
}

impl InputDims {
    /// Each branch sees the mention-side and entity-side vectors concatenated.
    pub fn from_features(store_dim: usize, mention_types: usize, entity_types: usize) -> Self {
        InputDims {
            name: 2 * store_dim,
            context: 2 * store_dim,
            types: mention_types + entity_types,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Name,
    Context,
    Types,
    Head,
    Matcher,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 5] = [
        ParamGroup::Name,
        ParamGroup::Context,
        ParamGroup::Types,
        ParamGroup::Head,
        ParamGroup::Matcher,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            ParamGroup::Name => "name",
            ParamGroup::Context => "context",
            ParamGroup::Types => "types",
            ParamGroup::Head => "head",
            ParamGroup::Matcher => "matcher",
        }
    }
}

/// All weights of the scoring network plus the auxiliary name-match head.
#[derive(Debug, Clone, PartialEq)]
pub struct RankerParams {
    pub name: Vec<Dense>,
    pub context: Vec<Dense>,
    pub types: Vec<Dense>,
    /// Hidden layers followed by the scalar output layer.
    pub head: Vec<Dense>,
    /// Scores name-branch outputs during auxiliary training only.
    pub matcher: Dense,
}

fn stack(input: usize, sizes: &[usize], rng: Option<&mut ChaCha8Rng>) -> Vec<Dense> {
    let mut layers = Vec::with_capacity(sizes.len());
    let mut prev = input;
    match rng {
        Some(rng) => {
            for &s in sizes {
                layers.push(Dense::init(prev, s, rng));
                prev = s;
            }
        }
        None => {
            for &s in sizes {
                layers.push(Dense::zeros(prev, s));
                prev = s;
            }
        }
    }
    layers
}

impl RankerParams {
    fn build(sizes: &LayerSizes, dims: InputDims, mut rng: Option<&mut ChaCha8Rng>) -> Result<Self> {
        for (part, s) in [("name", &sizes.name), ("context", &sizes.context), ("types", &sizes.types)] {
            if s.is_empty() || s.contains(&0) {
                return Err(Error::DimMismatch(format!("{part} branch has no usable layer")));
            }
        }
        if dims.name == 0 || dims.context == 0 {
            return Err(Error::DimMismatch("name and context inputs must be non-empty".into()));
        }
        let name = stack(dims.name, &sizes.name, rng.as_deref_mut());
        let context = stack(dims.context, &sizes.context, rng.as_deref_mut());
        let types = stack(dims.types, &sizes.types, rng.as_deref_mut());
        let joined = sizes.name.last().unwrap() + sizes.context.last().unwrap() + sizes.types.last().unwrap();
        let mut head_sizes = sizes.head.clone();
        head_sizes.push(1);
        let head = stack(joined, &head_sizes, rng.as_deref_mut());
        let matcher = stack(*sizes.name.last().unwrap(), &[1], rng).remove(0);
        Ok(RankerParams {
            name,
            context,
            types,
            head,
            matcher,
        })
    }

    pub fn zeros(sizes: &LayerSizes, dims: InputDims) -> Result<Self> {
        Self::build(sizes, dims, None)
    }

    /// Deterministic fan-in uniform initialization.
    pub fn init(sizes: &LayerSizes, dims: InputDims, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(sizes, dims, Some(&mut rng))
    }

    pub fn zeros_like(&self) -> Self {
        let z = |ls: &[Dense]| ls.iter().map(|l| Dense::zeros(l.input_dim(), l.output_dim())).collect();
        RankerParams {
            name: z(&self.name),
            context: z(&self.context),
            types: z(&self.types),
            head: z(&self.head),
            matcher: Dense::zeros(self.matcher.input_dim(), self.matcher.output_dim()),
        }
    }

    pub fn input_dims(&self) -> InputDims {
        InputDims {
            name: self.name[0].input_dim(),
            context: self.context[0].input_dim(),
            types: self.types[0].input_dim(),
        }
    }

    pub fn group(&self, g: ParamGroup) -> &[Dense] {
        match g {
            ParamGroup::Name => &self.name,
            ParamGroup::Context => &self.context,
            ParamGroup::Types => &self.types,
            ParamGroup::Head => &self.head,
            ParamGroup::Matcher => std::slice::from_ref(&self.matcher),
        }
    }

    pub fn group_mut(&mut self, g: ParamGroup) -> &mut [Dense] {
        match g {
            ParamGroup::Name => &mut self.name,
            ParamGroup::Context => &mut self.context,
            ParamGroup::Types => &mut self.types,
            ParamGroup::Head => &mut self.head,
            ParamGroup::Matcher => std::slice::from_mut(&mut self.matcher),
        }
    }

    /// Flat views of every tensor in `groups`, in a fixed order.
    pub fn slices(&self, groups: &[ParamGroup]) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for &g in groups {
            for l in self.group(g) {
                out.push(l.weight.as_slice().expect("standard layout"));
                out.push(l.bias.as_slice().expect("standard layout"));
            }
        }
        out
    }

    pub fn slices_mut(&mut self, groups: &[ParamGroup]) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        let mut seen = Vec::new();
        for &g in groups {
            if seen.contains(&g) {
                continue;
            }
            seen.push(g);
        }
        let RankerParams {
            name,
            context,
            types,
            head,
            matcher,
        } = self;
        let mut by_group: Vec<(ParamGroup, &mut [Dense])> = vec![
            (ParamGroup::Name, name.as_mut_slice()),
            (ParamGroup::Context, context.as_mut_slice()),
            (ParamGroup::Types, types.as_mut_slice()),
            (ParamGroup::Head, head.as_mut_slice()),
            (ParamGroup::Matcher, std::slice::from_mut(matcher)),
        ];
        for g in seen {
            let pos = by_group.iter().position(|(k, _)| *k == g).unwrap();
            let (_, layers) = by_group.swap_remove(pos);
            for l in layers.iter_mut() {
                out.push(l.weight.as_slice_mut().expect("standard layout"));
                out.push(l.bias.as_slice_mut().expect("standard layout"));
            }
        }
        out
    }

    /// Named tensors with shapes, for checkpoints.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        for g in ParamGroup::ALL {
            for (i, l) in self.group(g).iter().enumerate() {
                let base = if g == ParamGroup::Matcher {
                    g.prefix().to_string()
                } else {
                    format!("{}.{i}", g.prefix())
                };
                out.push((
                    format!("{base}.weight"),
                    vec![l.input_dim(), l.output_dim()],
                    l.weight.as_slice().expect("standard layout"),
                ));
                out.push((format!("{base}.bias"), vec![l.output_dim()], l.bias.as_slice().expect("standard layout")));
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.slices(&ParamGroup::ALL).iter().map(|s| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices(&ParamGroup::ALL).iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Checks that every layer's input matches the previous layer's output.
    pub fn validate(&self) -> Result<()> {
        let chain = |part: &str, layers: &[Dense]| -> Result<usize> {
            let first = layers
                .first()
                .ok_or_else(|| Error::DimMismatch(format!("{part} has no layers")))?;
            let mut prev = first.output_dim();
            for l in layers {
                if l.bias.len() != l.output_dim() {
                    return Err(Error::DimMismatch(format!("{part}: bias does not match weight")));
                }
            }
            for l in &layers[1..] {
                if l.input_dim() != prev {
                    return Err(Error::DimMismatch(format!(
                        "{part}: layer expects {} inputs, previous layer gives {prev}",
                        l.input_dim()
                    )));
                }
                prev = l.output_dim();
            }
            Ok(prev)
        };
        let n = chain("name", &self.name)?;
        let c = chain("context", &self.context)?;
        let t = chain("types", &self.types)?;
        if self.head.first().map(Dense::input_dim) != Some(n + c + t) {
            return Err(Error::DimMismatch("head input does not match branch outputs".into()));
        }
        if chain("head", &self.head)? != 1 {
            return Err(Error::DimMismatch("head must end in a scalar".into()));
        }
        if self.matcher.input_dim() != n || self.matcher.output_dim() != 1 {
            return Err(Error::DimMismatch("matcher must map name output to a scalar".into()));
        }
        if !self.is_finite() {
            return Err(Error::Numeric("parameters contain NaN or Inf".into()));
        }
        Ok(())
    }
}
