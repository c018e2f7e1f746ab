//! Candidate scoring, NIL thresholding and popularity re-ranking.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamodel::io::{read_jsonl, write_jsonl};
use crate::datamodel::{Dataset, Link, Mention, PopularityTable};
use crate::encoder::FeatureSpace;
use crate::error::{Error, Result};
use crate::ranker::{score_pairs, BranchMask, RankerParams};
use crate::triage::CandidateSet;

/// Default NIL threshold: below every Tanh score, so only mentions without
/// candidates become NIL.
pub const DEFAULT_THRESHOLD: f64 = -1.0;
pub const DEFAULT_RERANK_TOP_N: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntity {
    pub entity_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mention_id: String,
    pub predicted: Link,
    /// Score of the predicted entity, or of the best candidate when NIL;
    /// -1 when there are no candidates.
    pub score: f64,
    /// Descending by score, ties by entity id.
    pub ranked: Vec<RankedEntity>,
}

fn by_score_then_id(a: &RankedEntity, b: &RankedEntity) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.entity_id.cmp(&b.entity_id))
}

/// Infer-mode scores of every candidate of `m`, best first.
pub fn score_candidates(
    m: &Mention,
    cands: &CandidateSet,
    features: FeatureSpace<'_>,
    params: &RankerParams,
    mask: BranchMask,
) -> Result<Vec<RankedEntity>> {
    if cands.is_empty() {
        return Ok(Vec::new());
    }
    let mention = features.mention(m)?;
    let entities = cands.ids().map(|id| features.entity(id)).collect::<Result<Vec<_>>>()?;
    let pairs: Vec<_> = entities.iter().map(|e| (&mention, e)).collect();
    let scores = score_pairs(params, &pairs, mask)?;
    let mut ranked: Vec<RankedEntity> = cands
        .ids()
        .zip(scores)
        .map(|(id, score)| RankedEntity {
            entity_id: id.to_string(),
            score,
        })
        .collect();
    ranked.sort_by(by_score_then_id);
    Ok(ranked)
}

/// NIL when there is no candidate or the best score is strictly below
/// `threshold`.
pub fn predict(mention_id: &str, ranked: Vec<RankedEntity>, threshold: f64) -> Prediction {
    let (predicted, score) = match ranked.first() {
        Some(top) if top.score >= threshold => (Link::entity(top.entity_id.clone()), top.score),
        Some(top) => (Link::Nil, top.score),
        None => (Link::Nil, -1.0),
    };
    Prediction {
        mention_id: mention_id.to_string(),
        predicted,
        score,
        ranked,
    }
}

/// Among the first `top_n` ranked entities, picks the most popular; ties go
/// to the higher score, then the smaller id. NIL predictions are unchanged.
pub fn rerank_popularity(pred: &Prediction, pop: &PopularityTable, top_n: usize) -> Prediction {
    if pred.predicted.is_nil() || top_n == 0 {
        return pred.clone();
    }
    let best = pred.ranked.iter().take(top_n).max_by(|a, b| {
        pop.get(&a.entity_id)
            .cmp(&pop.get(&b.entity_id))
            .then_with(|| by_score_then_id(a, b).reverse())
    });
    match best {
        Some(e) => Prediction {
            predicted: Link::entity(e.entity_id.clone()),
            score: e.score,
            ..pred.clone()
        },
        None => pred.clone(),
    }
}

/// Scores and thresholds every mention of `ds`; candidate sets are matched by
/// mention id and a missing set counts as empty.
pub fn link_dataset(
    ds: &Dataset,
    cands: &[CandidateSet],
    features: FeatureSpace<'_>,
    params: &RankerParams,
    mask: BranchMask,
    threshold: f64,
) -> Result<Vec<Prediction>> {
    let by_id: HashMap<&str, &CandidateSet> = cands.iter().map(|c| (c.mention_id.as_str(), c)).collect();
    let empty = CandidateSet {
        mention_id: String::new(),
        candidates: Vec::new(),
    };
    ds.mentions
        .iter()
        .map(|m| {
            let c = by_id.get(m.id.as_str()).copied().unwrap_or(&empty);
            let ranked = score_candidates(m, c, features, params, mask)?;
            Ok(predict(&m.id, ranked, threshold))
        })
        .collect()
}

pub fn write_predictions(path: &Path, preds: &[Prediction]) -> Result<()> {
    write_jsonl(path, preds)
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let preds: Vec<Prediction> = read_jsonl(path)?;
    for p in &preds {
        if let Some(id) = p.predicted.entity_id() {
            if !p.ranked.iter().any(|r| r.entity_id == id) {
                return Err(Error::InvalidData(format!(
                    "prediction for {} names {id}, which is not among its ranked entities",
                    p.mention_id
                )));
            }
        }
    }
    Ok(preds)
}
