use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::datamodel::{Dataset, KnowledgeBase};

/// Ordered categorical vocabulary for one-hot type features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct TypeVocab {
    tags: Vec<String>,
    index: HashMap<String, usize>,
    pub min_count: u64,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    tags: Vec<String>,
    min_count: u64,
}

impl From<VocabRepr> for TypeVocab {
    fn from(r: VocabRepr) -> Self {
        TypeVocab::from_tags(r.tags, r.min_count)
    }
}

impl From<TypeVocab> for VocabRepr {
    fn from(v: TypeVocab) -> Self {
        VocabRepr {
            tags: v.tags,
            min_count: v.min_count,
        }
    }
}

impl TypeVocab {
    /// Vocabulary with the given tag order. Repeated tags keep their first index.
    pub fn from_tags(tags: impl IntoIterator<Item = impl Into<String>>, min_count: u64) -> Self {
        let mut out = TypeVocab {
            tags: Vec::new(),
            index: HashMap::new(),
            min_count,
        };
        for t in tags {
            let t = t.into();
            if !out.index.contains_key(&t) {
                out.index.insert(t.clone(), out.tags.len());
                out.tags.push(t);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }
}

/// Mention-type and entity-type vocabularies from training data.
///
/// Mention tags are counted once per mention; entity tags once per mention
/// linked to an entity carrying them. A tag is kept iff its count is strictly
/// greater than `min_count`. Tags are ordered lexicographically.
pub fn build_type_vocab(ds: &Dataset, kb: &KnowledgeBase, min_count: u64) -> (TypeVocab, TypeVocab) {
    let mut mention_counts: BTreeMap<&str, u64> = BTreeMap::new();
    let mut entity_counts: BTreeMap<&str, u64> = BTreeMap::new();
    for m in &ds.mentions {
        *mention_counts.entry(m.mention_type.as_str()).or_insert(0) += 1;
        if let Some(e) = m.gold.entity_id().and_then(|id| kb.get(id)) {
            for t in &e.types {
                *entity_counts.entry(t.as_str()).or_insert(0) += 1;
            }
        }
    }
    let keep = |counts: BTreeMap<&str, u64>| {
        TypeVocab::from_tags(
            counts
                .into_iter()
                .filter(|(_, c)| *c > min_count)
                .map(|(t, _)| t.to_string()),
            min_count,
        )
    };
    (keep(mention_counts), keep(entity_counts))
}

/// Multi-hot encoding; tags outside the vocabulary are ignored.
pub fn type_onehot<S: AsRef<str>>(tags: &[S], vocab: &TypeVocab) -> Vec<f32> {
    let mut v = vec![0.0; vocab.len()];
    for t in tags {
        if let Some(i) = vocab.index_of(t.as_ref()) {
            v[i] = 1.0;
        }
    }
    v
}
