use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::adam::{Adam, AdamConfig};
use super::config::{AuxConfig, BranchMask, TrainConfig};
use super::loss::{aux_loss_grad, batch_loss_grad, AuxExample, TrainingExample};
use super::network::Mode;
use super::params::{InputDims, ParamGroup, RankerParams};
use crate::datamodel::Dataset;
use crate::encoder::{FeatureSpace, RepresentationBundle};
use crate::error::{Error, Result};
use crate::triage::CandidateSet;

/// Up to `n` distinct non-gold candidate ids.
pub fn sample_negatives(gold: &str, cands: &CandidateSet, n: usize, rng: &mut impl Rng) -> Vec<String> {
    let pool: Vec<&str> = cands.ids().filter(|id| *id != gold).collect();
    pool.choose_multiple(rng, n.min(pool.len())).map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub main_loss: f64,
    pub aux_loss: Option<f64>,
}

pub struct TrainOutcome {
    pub params: RankerParams,
    pub trace: Vec<EpochStats>,
    /// Mentions that contributed to the ranking loss.
    pub n_examples: usize,
}

pub fn write_loss_trace(path: &Path, trace: &[EpochStats]) -> Result<()> {
    let mut out = String::from("epoch,main_loss,aux_loss\n");
    for s in trace {
        let aux = s.aux_loss.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", s.epoch, s.main_loss, aux));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

struct Prepared {
    mention: RepresentationBundle,
    gold: String,
    cand_index: usize,
}

fn adam_config(cfg: &TrainConfig) -> AdamConfig {
    AdamConfig {
        lr: cfg.lr,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        eps: cfg.adam_eps,
    }
}

/// Trains the ranker with the pairwise hinge objective on the linked mentions
/// of `ds` whose candidate set contains a non-gold entity.
///
/// `cands` is aligned with `ds.mentions`. When `cfg.aux` is set and `aux_pairs`
/// (encoded `(source, english)` names) is non-empty, one name-match epoch
/// precedes every ranking epoch.
pub fn train(
    ds: &Dataset,
    cands: &[CandidateSet],
    features: FeatureSpace<'_>,
    cfg: &TrainConfig,
    mask: BranchMask,
    aux_pairs: &[(Vec<f32>, Vec<f32>)],
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cands.len() != ds.len() {
        return Err(Error::InvalidArgument(format!(
            "{} candidate sets for {} mentions",
            cands.len(),
            ds.len()
        )));
    }
    let mut entities: BTreeMap<String, RepresentationBundle> = BTreeMap::new();
    let mut prepared = Vec::new();
    for (i, (m, c)) in ds.mentions.iter().zip(cands).enumerate() {
        if c.mention_id != m.id {
            return Err(Error::InvalidArgument(format!(
                "candidate set {} is for {}, mention is {}",
                i, c.mention_id, m.id
            )));
        }
        let Some(gold) = m.gold.entity_id() else { continue };
        if !c.ids().any(|id| id != gold) {
            continue;
        }
        for id in c.ids().chain(std::iter::once(gold)) {
            if !entities.contains_key(id) {
                entities.insert(id.to_string(), features.entity(id)?);
            }
        }
        prepared.push(Prepared {
            mention: features.mention(m)?,
            gold: gold.to_string(),
            cand_index: i,
        });
    }
    if prepared.is_empty() {
        return Err(Error::InvalidData("no linked mention has a non-gold candidate to train against".into()));
    }

    let dims = InputDims::from_features(
        features.store.dim(),
        features.mention_vocab.len(),
        features.entity_vocab.len(),
    );
    let mut params = RankerParams::init(&cfg.layers, dims, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7261_6e6b_6572);
    let mut adam = Adam::new(adam_config(cfg), &params, &ParamGroup::ALL);
    let aux = match (&cfg.aux, aux_pairs.len() >= 2) {
        (Some(a), true) => Some((a, Adam::new(adam_config(cfg), &params, &[ParamGroup::Name, ParamGroup::Matcher]))),
        _ => None,
    };
    let mut aux = aux;

    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let aux_loss = match &mut aux {
            Some((acfg, aux_adam)) => Some(train_aux_epoch(&mut params, aux_pairs, acfg, cfg, aux_adam, &mut rng)?),
            None => None,
        };
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let negs: Vec<Vec<String>> = chunk
                .iter()
                .map(|&i| {
                    let p = &prepared[i];
                    sample_negatives(&p.gold, &cands[p.cand_index], cfg.n_negatives, &mut rng)
                })
                .collect();
            let examples: Vec<TrainingExample<'_>> = chunk
                .iter()
                .zip(&negs)
                .map(|(&i, n)| TrainingExample {
                    mention: &prepared[i].mention,
                    positive: &entities[&prepared[i].gold],
                    negatives: n.iter().map(|id| &entities[id]).collect(),
                })
                .collect();
            let mode = Mode::Train {
                dropout: cfg.dropout,
                rng: &mut rng,
            };
            let (loss, grads) = batch_loss_grad(&params, &examples, cfg.margin, mask, mode)?;
            adam.step(&mut params, &grads)?;
            total += loss * chunk.len() as f64;
        }
        trace.push(EpochStats {
            epoch,
            main_loss: total / prepared.len() as f64,
            aux_loss,
        });
    }
    Ok(TrainOutcome {
        params,
        trace,
        n_examples: prepared.len(),
    })
}

/// One pass of the name-match objective over a random subset of `pairs`.
/// Only the name branch and the matcher head change; returns the mean loss.
pub fn train_aux_epoch(
    params: &mut RankerParams,
    pairs: &[(Vec<f32>, Vec<f32>)],
    aux: &AuxConfig,
    cfg: &TrainConfig,
    adam: &mut Adam,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::InvalidArgument("name matching needs at least two pairs".into()));
    }
    let k = aux.subset_k.min(pairs.len());
    let subset = rand::seq::index::sample(rng, pairs.len(), k).into_vec();
    let n_neg = aux.n_negatives.min(pairs.len() - 1);
    let mut total = 0.0;
    for chunk in subset.chunks(cfg.batch_size) {
        let negs: Vec<Vec<usize>> = chunk
            .iter()
            .map(|&i| {
                let mut picked = rand::seq::index::sample(rng, pairs.len() - 1, n_neg).into_vec();
                // Skip over the positive index.
                for j in &mut picked {
                    if *j >= i {
                        *j += 1;
                    }
                }
                picked
            })
            .collect();
        let examples: Vec<AuxExample<'_>> = chunk
            .iter()
            .zip(&negs)
            .map(|(&i, n)| AuxExample {
                source: &pairs[i].0,
                positive: &pairs[i].1,
                negatives: n.iter().map(|&j| pairs[j].1.as_slice()).collect(),
            })
            .collect();
        let mode = Mode::Train {
            dropout: cfg.dropout,
            rng,
        };
        let (loss, grads) = aux_loss_grad(params, &examples, cfg.margin, mode)?;
        adam.step(params, &grads)?;
        total += loss * chunk.len() as f64;
    }
    Ok(total / k as f64)
}
