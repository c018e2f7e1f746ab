use serde::{Deserialize, Serialize};

use super::hashing::test_encode;
use super::store::EmbeddingStore;
use super::vocab::{type_onehot, TypeVocab};
use crate::datamodel::{Dataset, Entity, KnowledgeBase, Mention};
use crate::error::{Error, Result};

pub fn mention_key(id: &str, facet: &str) -> String {
    format!("m:{id}:{facet}")
}

pub fn entity_key(id: &str, facet: &str) -> String {
    format!("e:{id}:{facet}")
}

/// Name, context and type features of one side of a (mention, entity) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationBundle {
    pub name: Vec<f32>,
    pub context: Vec<f32>,
    pub types: Vec<f32>,
}

pub fn assemble_mention(
    m: &Mention,
    store: &EmbeddingStore,
    vocab: &TypeVocab,
) -> Result<RepresentationBundle> {
    let name_key = mention_key(&m.id, "name");
    let ctx_key = mention_key(&m.id, "ctx");
    let name = store.get(&name_key).ok_or(Error::MissingKey(name_key))?;
    let context = store.get(&ctx_key).ok_or(Error::MissingKey(ctx_key))?;
    Ok(RepresentationBundle {
        name: name.to_vec(),
        context: context.to_vec(),
        types: type_onehot(std::slice::from_ref(&m.mention_type), vocab),
    })
}

/// Entities without a description may lack a context vector; they get zeros.
pub fn assemble_entity(
    e: &Entity,
    store: &EmbeddingStore,
    vocab: &TypeVocab,
) -> Result<RepresentationBundle> {
    let name_key = entity_key(&e.id, "name");
    let ctx_key = entity_key(&e.id, "ctx");
    let name = store.get(&name_key).ok_or(Error::MissingKey(name_key))?;
    let context = match store.get(&ctx_key) {
        Some(v) => v.to_vec(),
        None if e.description.trim().is_empty() => vec![0.0; store.dim()],
        None => return Err(Error::MissingKey(ctx_key)),
    };
    Ok(RepresentationBundle {
        name: name.to_vec(),
        context,
        types: type_onehot(&e.types, vocab),
    })
}

/// Everything needed to turn mentions and KB ids into feature bundles.
#[derive(Clone, Copy)]
pub struct FeatureSpace<'a> {
    pub store: &'a EmbeddingStore,
    pub kb: &'a KnowledgeBase,
    pub mention_vocab: &'a TypeVocab,
    pub entity_vocab: &'a TypeVocab,
}

impl FeatureSpace<'_> {
    pub fn mention(&self, m: &Mention) -> Result<RepresentationBundle> {
        assemble_mention(m, self.store, self.mention_vocab)
    }

    pub fn entity(&self, id: &str) -> Result<RepresentationBundle> {
        let e = self.kb.get(id).ok_or_else(|| Error::Referential {
            id: id.to_string(),
            context: format!("knowledge base {}", self.kb.id),
        })?;
        assemble_entity(e, self.store, self.entity_vocab)
    }
}

/// Settings of the hashing test encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestEncoderConfig {
    pub dim: usize,
    pub seed: u64,
}

impl Default for TestEncoderConfig {
    fn default() -> Self {
        TestEncoderConfig { dim: 64, seed: 0 }
    }
}

impl TestEncoderConfig {
    pub fn encode(&self, text: &str) -> Result<Vec<f32>> {
        test_encode(text, self.dim, self.seed)
    }
}

/// Encodes every entity of `kb` and every mention of `datasets` into one store.
pub fn encode_corpus<'a>(
    kb: &KnowledgeBase,
    datasets: impl IntoIterator<Item = &'a Dataset>,
    cfg: TestEncoderConfig,
) -> Result<EmbeddingStore> {
    let mut store = EmbeddingStore::new(cfg.dim)?;
    for e in kb.entities() {
        store.insert(entity_key(&e.id, "name"), cfg.encode(&e.name)?)?;
        if !e.description.trim().is_empty() {
            store.insert(entity_key(&e.id, "ctx"), cfg.encode(&e.description)?)?;
        }
    }
    for ds in datasets {
        for m in &ds.mentions {
            store.insert(mention_key(&m.id, "name"), cfg.encode(&m.surface)?)?;
            store.insert(mention_key(&m.id, "ctx"), cfg.encode(&m.context_text())?)?;
        }
    }
    Ok(store)
}
