//! Dataset splits and the training-set reductions used by the diagnostics.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::types::{Dataset, PopularityTable};
use crate::error::{Error, Result};

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "fraction must lie in the open interval (0, 1), got {fraction}"
        )))
    }
}

fn shuffled_docs(ds: &Dataset, seed: u64) -> Vec<&str> {
    let mut docs: Vec<&str> = ds.documents().keys().map(String::as_str).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    docs.shuffle(&mut rng);
    docs
}

/// Randomly partitions documents; the second part holds `ceil(fraction * docs)`
/// documents (at most `docs - 1`).
pub fn split_by_document(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    check_fraction(fraction)?;
    let n_docs = ds.documents().len();
    if n_docs < 2 {
        return Err(Error::InvalidArgument(format!(
            "split needs at least 2 documents, dataset has {n_docs}"
        )));
    }
    let holdout = ((fraction * n_docs as f64).ceil() as usize).clamp(1, n_docs - 1);
    let docs = shuffled_docs(ds, seed);
    let held: BTreeSet<&str> = docs[..holdout].iter().copied().collect();
    let rest = ds.filter(|m| !held.contains(m.doc_id.as_str()));
    let second = ds.filter(|m| held.contains(m.doc_id.as_str()));
    Ok((rest, second))
}

/// Document-partitioned random subset holding roughly `fraction` of the mentions.
///
/// Documents are taken in shuffled order until the running mention count
/// reaches `fraction * len`.
pub fn reduce_random(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    check_fraction(fraction)?;
    let target = fraction * ds.len() as f64;
    let mut kept: BTreeSet<&str> = BTreeSet::new();
    let mut count = 0usize;
    for doc in shuffled_docs(ds, seed) {
        if count as f64 >= target {
            break;
        }
        kept.insert(doc);
        count += ds.documents()[doc].len();
    }
    Ok(ds.filter(|m| kept.contains(m.doc_id.as_str())))
}

fn gold_counts(ds: &Dataset) -> BTreeMap<&str, usize> {
    let mut counts = BTreeMap::new();
    for id in ds.mentions.iter().filter_map(|m| m.gold.entity_id()) {
        *counts.entry(id).or_insert(0) += 1;
    }
    counts
}

/// Keeps the mentions of the least frequent gold entities, whole entities at a
/// time, until adding the next entity would exceed `fraction` of the non-NIL
/// mentions. Entities are ordered by (count, id). NIL mentions are retained.
pub fn reduce_tail(ds: &Dataset, fraction: f64) -> Result<Dataset> {
    check_fraction(fraction)?;
    if ds.is_empty() {
        return Err(Error::InvalidArgument("reduce_tail on an empty dataset".into()));
    }
    let counts = gold_counts(ds);
    let total: usize = counts.values().sum();
    let budget = fraction * total as f64;
    let mut order: Vec<(&str, usize)> = counts.into_iter().collect();
    order.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));
    let mut kept: BTreeSet<&str> = BTreeSet::new();
    let mut used = 0usize;
    for (id, c) in order {
        if (used + c) as f64 > budget {
            break;
        }
        used += c;
        kept.insert(id);
    }
    Ok(ds.filter(|m| match m.gold.entity_id() {
        None => true,
        Some(id) => kept.contains(id),
    }))
}

/// Keeps mentions whose gold entity has at most `n` mentions in `ds`.
pub fn reduce_by_entity_cap(ds: &Dataset, n: usize) -> Result<Dataset> {
    if n < 1 {
        return Err(Error::InvalidArgument("entity cap must be at least 1".into()));
    }
    let counts = gold_counts(ds);
    Ok(ds.filter(|m| match m.gold.entity_id() {
        None => true,
        Some(id) => counts[id] <= n,
    }))
}

/// Drops training mentions linked to any entity that is a gold link in `eval`.
pub fn remove_eval_entities(train: &Dataset, eval: &Dataset) -> Dataset {
    let banned = eval.gold_entities();
    train.filter(|m| match m.gold.entity_id() {
        None => true,
        Some(id) => !banned.contains(id),
    })
}

pub fn popularity_counts(ds: &Dataset) -> PopularityTable {
    PopularityTable {
        counts: gold_counts(ds)
            .into_iter()
            .map(|(k, v)| (k.to_string(), v as u64))
            .collect(),
    }
}
