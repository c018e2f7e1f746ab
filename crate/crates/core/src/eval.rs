//! Precision, recall, F1 over linked mentions and micro-average accuracy.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datamodel::{Dataset, Link};
use crate::error::{Error, Result};
use crate::inference::Prediction;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub n_mentions: usize,
    pub n_gold_links: usize,
    pub n_pred_links: usize,
    pub n_correct_links: usize,
    pub n_correct_nils: usize,
}

impl EvalCounts {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a Link, &'a Link)>) -> Self {
        let mut c = EvalCounts::default();
        for (gold, pred) in pairs {
            c.n_mentions += 1;
            match (gold, pred) {
                (Link::Nil, Link::Nil) => c.n_correct_nils += 1,
                (Link::Nil, Link::Entity(_)) => c.n_pred_links += 1,
                (Link::Entity(_), Link::Nil) => c.n_gold_links += 1,
                (Link::Entity(g), Link::Entity(p)) => {
                    c.n_gold_links += 1;
                    c.n_pred_links += 1;
                    if g == p {
                        c.n_correct_links += 1;
                    }
                }
            }
        }
        c
    }

    pub fn add(&mut self, other: &EvalCounts) {
        self.n_mentions += other.n_mentions;
        self.n_gold_links += other.n_gold_links;
        self.n_pred_links += other.n_pred_links;
        self.n_correct_links += other.n_correct_links;
        self.n_correct_nils += other.n_correct_nils;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub micro_avg: f64,
    pub counts: EvalCounts,
}

/// `num / den`; an empty denominator scores 1 only when the other side is
/// empty too.
fn ratio(num: usize, den: usize, other_den: usize) -> f64 {
    match (den, other_den) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        _ => num as f64 / den as f64,
    }
}

impl EvalReport {
    /// An empty evaluation set has micro-average 1.
    pub fn from_counts(c: EvalCounts) -> Self {
        let precision = ratio(c.n_correct_links, c.n_pred_links, c.n_gold_links);
        let recall = ratio(c.n_correct_links, c.n_gold_links, c.n_pred_links);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let micro_avg = if c.n_mentions == 0 {
            1.0
        } else {
            (c.n_correct_links + c.n_correct_nils) as f64 / c.n_mentions as f64
        };
        EvalReport {
            precision,
            recall,
            f1,
            micro_avg,
            counts: c,
        }
    }
}

/// Matches predictions to gold mentions by id; both sides must cover the
/// same ids exactly once.
pub fn evaluate(preds: &[Prediction], gold: &Dataset) -> Result<EvalReport> {
    let mut by_id: HashMap<&str, &Link> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.mention_id.as_str(), &p.predicted).is_some() {
            return Err(Error::DuplicateKey(format!("prediction for mention {}", p.mention_id)));
        }
    }
    let mut pairs = Vec::with_capacity(gold.len());
    for m in &gold.mentions {
        let pred = by_id
            .get(m.id.as_str())
            .ok_or_else(|| Error::MissingKey(format!("no prediction for mention {}", m.id)))?;
        pairs.push((&m.gold, *pred));
    }
    if preds.len() != gold.len() {
        let known: HashSet<&str> = gold.mentions.iter().map(|m| m.id.as_str()).collect();
        let extra = preds.iter().find(|p| !known.contains(p.mention_id.as_str())).expect("counts differ");
        return Err(Error::InvalidData(format!("prediction for unknown mention {}", extra.mention_id)));
    }
    Ok(EvalReport::from_counts(EvalCounts::from_pairs(pairs)))
}

/// Aligned text table with columns avg., prec., recall, F1.
pub fn format_table(rows: &[(String, EvalReport)]) -> String {
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}", "", "avg.", "prec.", "recall", "F1");
    for (label, r) in rows {
        let _ = writeln!(
            out,
            "{label:<width$}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}",
            r.micro_avg, r.precision, r.recall, r.f1
        );
    }
    out
}
