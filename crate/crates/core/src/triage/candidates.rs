use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::prior::PriorTable;
use crate::datamodel::{Dataset, KnowledgeBase, Mention};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TriageConfig {
    /// Top titles (or entities) taken from the prior.
    pub k: usize,
    /// Entity budget of the two-step KB expansion.
    pub l: usize,
    /// Case-fold and collapse whitespace before alias lookup.
    pub normalize: bool,
    /// Treat prior targets as wiki titles and expand them into KB entities.
    pub two_step: bool,
}

impl Default for TriageConfig {
    fn default() -> Self {
        TriageConfig {
            k: 10,
            l: 200,
            normalize: true,
            two_step: false,
        }
    }
}

impl TriageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l < self.k {
            return Err(Error::InvalidArgument(format!(
                "triage needs k >= 1 and l >= k (k = {}, l = {})",
                self.k, self.l
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub entity_id: String,
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub mention_id: String,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn contains(&self, entity_id: &str) -> bool {
        self.candidates.iter().any(|c| c.entity_id == entity_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|c| c.entity_id.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }
}

/// Top-k prefix of the prior row for the mention surface. Unseen surfaces give
/// an empty set.
pub fn candidates(m: &Mention, prior: &PriorTable, cfg: &TriageConfig) -> CandidateSet {
    CandidateSet {
        mention_id: m.id.clone(),
        candidates: prior
            .row(&m.surface)
            .iter()
            .take(cfg.k)
            .map(|(id, p)| Candidate {
                entity_id: id.clone(),
                prior: *p,
            })
            .collect(),
    }
}

/// Splits `total` slots proportionally to `weights` with largest-remainder
/// rounding; earlier entries win ties. The result sums to `total` whenever
/// some weight is positive.
pub fn allocate_slots(weights: &[f64], total: usize) -> Vec<usize> {
    let mass: f64 = weights.iter().filter(|w| **w > 0.0).sum();
    if weights.is_empty() || mass <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights
        .iter()
        .map(|w| w.max(0.0) / mass * total as f64)
        .collect();
    let mut slots: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = slots.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        slots[i] += 1;
    }
    slots
}

/// Two-step expansion of wiki-title candidates into KB entities.
///
/// Each title receives a share of `cfg.l` proportional to its prior. A title
/// is resolved through the title index first, then through the name index
/// (underscores read as spaces). When no title yields anything the mention
/// surface is looked up by name. Entities inherit their title's prior; an
/// entity reached twice keeps the higher prior. Surface-fallback entities
/// share a uniform prior.
pub fn expand_kb(cands: &CandidateSet, kb: &KnowledgeBase, m: &Mention, cfg: &TriageConfig) -> CandidateSet {
    let mut found: BTreeMap<String, f64> = BTreeMap::new();
    if cands.is_empty() {
        return CandidateSet {
            mention_id: cands.mention_id.clone(),
            candidates: Vec::new(),
        };
    }
    let weights: Vec<f64> = cands.candidates.iter().map(|c| c.prior).collect();
    let slots = allocate_slots(&weights, cfg.l);
    for (cand, budget) in cands.candidates.iter().zip(slots) {
        if budget == 0 {
            continue;
        }
        let mut hits: Vec<&str> = Vec::new();
        if let Some(id) = kb.lookup_title(&cand.entity_id) {
            hits.push(id);
        }
        for id in kb.lookup_name(&cand.entity_id.replace('_', " ")) {
            if !hits.contains(&id) {
                hits.push(id);
            }
        }
        for id in hits.into_iter().take(budget) {
            let slot = found.entry(id.to_string()).or_insert(cand.prior);
            if cand.prior > *slot {
                *slot = cand.prior;
            }
        }
    }
    if found.is_empty() {
        let hits = kb.lookup_name(&m.surface);
        let n = hits.len().min(cfg.l);
        for id in hits.into_iter().take(n) {
            found.insert(id.to_string(), 1.0 / n as f64);
        }
    }
    let mut candidates: Vec<Candidate> = found
        .into_iter()
        .map(|(entity_id, prior)| Candidate { entity_id, prior })
        .collect();
    candidates.sort_by(|a, b| b.prior.total_cmp(&a.prior).then_with(|| a.entity_id.cmp(&b.entity_id)));
    candidates.truncate(cfg.l);
    CandidateSet {
        mention_id: cands.mention_id.clone(),
        candidates,
    }
}

/// Candidates for every mention of `ds`, expanded through the KB when
/// `cfg.two_step` is set.
pub fn triage_dataset(
    ds: &Dataset,
    prior: &PriorTable,
    kb: &KnowledgeBase,
    cfg: &TriageConfig,
) -> Result<Vec<CandidateSet>> {
    cfg.validate()?;
    Ok(ds
        .mentions
        .iter()
        .map(|m| {
            let c = candidates(m, prior, cfg);
            if cfg.two_step {
                expand_kb(&c, kb, m, cfg)
            } else {
                c
            }
        })
        .collect())
}

/// Fraction of non-NIL mentions whose gold entity is among their candidates.
/// A dataset without linked mentions has recall 1.
pub fn triage_recall(cands: &[CandidateSet], ds: &Dataset) -> f64 {
    let by_id: HashMap<&str, &CandidateSet> =
        cands.iter().map(|c| (c.mention_id.as_str(), c)).collect();
    let mut linked = 0usize;
    let mut hit = 0usize;
    for m in &ds.mentions {
        if let Some(gold) = m.gold.entity_id() {
            linked += 1;
            if by_id.get(m.id.as_str()).is_some_and(|c| c.contains(gold)) {
                hit += 1;
            }
        }
    }
    if linked == 0 {
        1.0
    } else {
        hit as f64 / linked as f64
    }
}
