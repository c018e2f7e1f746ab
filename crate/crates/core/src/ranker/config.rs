use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden layer widths of each part of the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayerSizes {
    pub name: Vec<usize>,
    pub context: Vec<usize>,
    pub types: Vec<usize>,
    /// Hidden layers of the final stack; a scalar output layer follows.
    pub head: Vec<usize>,
}

impl Default for LayerSizes {
    fn default() -> Self {
        LayerSizes {
            name: vec![512],
            context: vec![512],
            types: vec![64],
            head: vec![512, 256],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuxConfig {
    /// TSV of `source_name \t english_name` pairs, when read from disk.
    pub pairs_path: Option<String>,
    pub subset_k: usize,
    pub n_negatives: usize,
}

impl Default for AuxConfig {
    fn default() -> Self {
        AuxConfig {
            pairs_path: None,
            subset_k: 50_000,
            n_negatives: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub dropout: f64,
    /// Hinge margin.
    pub margin: f64,
    pub n_negatives: usize,
    pub batch_size: usize,
    pub aux: Option<AuxConfig>,
    pub layers: LayerSizes,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            epochs: 250,
            dropout: 0.2,
            margin: 0.5,
            n_negatives: 9,
            batch_size: 32,
            aux: None,
            layers: LayerSizes::default(),
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return fail(format!("margin must be positive, got {}", self.margin));
        }
        if self.n_negatives == 0 || self.batch_size == 0 {
            return fail("n_negatives and batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.adam_eps <= 0.0 {
            return fail("invalid ADAM hyperparameters".into());
        }
        let l = &self.layers;
        for (part, sizes) in [("name", &l.name), ("context", &l.context), ("types", &l.types)] {
            if sizes.is_empty() || sizes.contains(&0) {
                return fail(format!("{part} branch needs at least one non-empty layer"));
            }
        }
        if l.head.contains(&0) {
            return fail("head layers must be non-empty".into());
        }
        if let Some(aux) = &self.aux {
            if aux.subset_k == 0 || aux.n_negatives == 0 {
                return fail("aux subset_k and n_negatives must be at least 1".into());
            }
        }
        Ok(())
    }
}

/// Which feature branches feed the final stack. Serialized as the
/// comma-separated form, e.g. `"name,context"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BranchMask {
    pub use_name: bool,
    pub use_context: bool,
    pub use_type: bool,
}

impl BranchMask {
    pub const ALL: BranchMask = BranchMask {
        use_name: true,
        use_context: true,
        use_type: true,
    };
    pub const NAME_ONLY: BranchMask = BranchMask {
        use_name: true,
        use_context: false,
        use_type: false,
    };
    pub const CONTEXT_ONLY: BranchMask = BranchMask {
        use_name: false,
        use_context: true,
        use_type: false,
    };

    pub fn new(use_name: bool, use_context: bool, use_type: bool) -> Result<Self> {
        if !(use_name || use_context || use_type) {
            return Err(Error::Config("branch mask must enable at least one branch".into()));
        }
        Ok(BranchMask {
            use_name,
            use_context,
            use_type,
        })
    }
}

impl Default for BranchMask {
    fn default() -> Self {
        BranchMask::ALL
    }
}

/// Parses comma-separated branch names, e.g. `name,context`.
impl FromStr for BranchMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (mut n, mut c, mut t) = (false, false, false);
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "name" => n = true,
                "context" => c = true,
                "type" | "types" => t = true,
                other => return Err(Error::Config(format!("unknown branch {other:?} in mask"))),
            }
        }
        BranchMask::new(n, c, t)
    }
}

impl fmt::Display for BranchMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = [
            (self.use_name, "name"),
            (self.use_context, "context"),
            (self.use_type, "type"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        f.write_str(&parts.join(","))
    }
}

impl Serialize for BranchMask {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BranchMask {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
