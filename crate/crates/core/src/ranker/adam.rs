use super::params::{ParamGroup, RankerParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// Bias-corrected ADAM over a fixed subset of parameter groups.
pub struct Adam {
    cfg: AdamConfig,
    groups: Vec<ParamGroup>,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &RankerParams, groups: &[ParamGroup]) -> Self {
        let sizes: Vec<usize> = params.slices(groups).iter().map(|s| s.len()).collect();
        Adam {
            cfg,
            groups: groups.to_vec(),
            t: 0,
            m: sizes.iter().map(|n| vec![0.0; *n]).collect(),
            v: sizes.iter().map(|n| vec![0.0; *n]).collect(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut RankerParams, grads: &RankerParams) -> Result<()> {
        let gs = grads.slices(&self.groups);
        if gs.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        let ps = params.slices_mut(&self.groups);
        for (((p, g), m), v) in ps.into_iter().zip(gs).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}
