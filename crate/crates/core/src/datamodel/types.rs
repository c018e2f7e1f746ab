use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Literal used for NIL links in every on-disk format.
pub const NIL: &str = "NIL";

/// Gold (or predicted) link of a mention: an entity id or NIL.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Link {
    Nil,
    Entity(String),
}

impl Link {
    pub fn entity(id: impl Into<String>) -> Self {
        Link::Entity(id.into())
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Link::Nil)
    }

    pub fn entity_id(&self) -> Option<&str> {
        match self {
            Link::Nil => None,
            Link::Entity(id) => Some(id),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Link::Nil => NIL,
            Link::Entity(id) => id,
        }
    }
}

impl From<&str> for Link {
    fn from(s: &str) -> Self {
        if s == NIL {
            Link::Nil
        } else {
            Link::Entity(s.to_string())
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Link {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Link {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(Link::from(s.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mention {
    pub id: String,
    pub doc_id: String,
    pub language: String,
    pub surface: String,
    pub sentence: String,
    #[serde(default)]
    pub context_window: Vec<String>,
    pub mention_type: String,
    pub gold: Link,
}

impl Mention {
    /// Text fed to the context encoder: the window if present, else the sentence.
    pub fn context_text(&self) -> String {
        if self.context_window.is_empty() {
            self.sentence.clone()
        } else {
            self.context_window.join(" ")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub types: Vec<String>,
    #[serde(default)]
    pub wiki_title: Option<String>,
    #[serde(default = "default_in_kb")]
    pub in_kb: bool,
}

fn default_in_kb() -> bool {
    true
}

/// Case-fold and collapse runs of whitespace to a single space.
pub fn normalize_surface(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for (i, word) in s.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// Entity collection with name and wiki-title lookups.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    pub id: String,
    entities: BTreeMap<String, Entity>,
    name_index: BTreeMap<String, BTreeSet<String>>,
    title_index: BTreeMap<String, String>,
}

impl KnowledgeBase {
    pub fn new(id: impl Into<String>, entities: impl IntoIterator<Item = Entity>) -> Result<Self> {
        let mut kb = KnowledgeBase {
            id: id.into(),
            ..Default::default()
        };
        for e in entities {
            kb.insert(e)?;
        }
        Ok(kb)
    }

    fn insert(&mut self, e: Entity) -> Result<()> {
        if e.id.is_empty() || e.id == NIL {
            return Err(Error::InvalidData(format!(
                "entity id {:?} is reserved or empty",
                e.id
            )));
        }
        if e.name.trim().is_empty() {
            return Err(Error::InvalidData(format!("entity {} has an empty name", e.id)));
        }
        if self.entities.contains_key(&e.id) {
            return Err(Error::DuplicateKey(e.id));
        }
        for key in [e.name.clone(), normalize_surface(&e.name)] {
            self.name_index.entry(key).or_default().insert(e.id.clone());
        }
        if let Some(title) = &e.wiki_title {
            if let Some(prev) = self.title_index.insert(title.clone(), e.id.clone()) {
                return Err(Error::InvalidData(format!(
                    "wiki title {title:?} claimed by both {prev} and {}",
                    e.id
                )));
            }
        }
        self.entities.insert(e.id.clone(), e);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entities.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Entities in ascending id order.
    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    /// Ids whose name matches `name` exactly or after normalization, ascending.
    pub fn lookup_name(&self, name: &str) -> Vec<&str> {
        let mut ids: BTreeSet<&str> = BTreeSet::new();
        for key in [name.to_string(), normalize_surface(name)] {
            if let Some(set) = self.name_index.get(&key) {
                ids.extend(set.iter().map(String::as_str));
            }
        }
        ids.into_iter().collect()
    }

    pub fn lookup_title(&self, title: &str) -> Option<&str> {
        self.title_index.get(title).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub mentions: Vec<Mention>,
    pub kb_ref: String,
    documents: BTreeMap<String, Vec<String>>,
}

impl Dataset {
    /// Builds a dataset, checking mention invariants. Gold ids are checked
    /// against `kb` when given.
    pub fn new(
        mentions: Vec<Mention>,
        kb_ref: impl Into<String>,
        kb: Option<&KnowledgeBase>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut documents: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for m in &mentions {
            validate_mention(m, kb)?;
            if !seen.insert(m.id.as_str()) {
                return Err(Error::DuplicateKey(m.id.clone()));
            }
            documents.entry(m.doc_id.clone()).or_default().push(m.id.clone());
        }
        Ok(Dataset {
            mentions,
            kb_ref: kb_ref.into(),
            documents,
        })
    }

    pub fn empty(kb_ref: impl Into<String>) -> Self {
        Dataset {
            mentions: Vec::new(),
            kb_ref: kb_ref.into(),
            documents: BTreeMap::new(),
        }
    }

    /// Keeps mentions for which `keep` holds, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(&Mention) -> bool) -> Dataset {
        let mentions: Vec<Mention> = self.mentions.iter().filter(|m| keep(m)).cloned().collect();
        Dataset::from_trusted(mentions, self.kb_ref.clone())
    }

    /// Concatenates datasets that share a KB. Mention ids must stay unique.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Dataset>) -> Result<Dataset> {
        let mut mentions = Vec::new();
        let mut kb_ref: Option<String> = None;
        for part in parts {
            match &kb_ref {
                None => kb_ref = Some(part.kb_ref.clone()),
                Some(r) if *r != part.kb_ref => {
                    return Err(Error::InvalidData(format!(
                        "cannot concatenate datasets over different KBs ({r} vs {})",
                        part.kb_ref
                    )))
                }
                _ => {}
            }
            mentions.extend(part.mentions.iter().cloned());
        }
        Dataset::new(mentions, kb_ref.unwrap_or_default(), None)
    }

    pub(crate) fn from_trusted(mentions: Vec<Mention>, kb_ref: String) -> Dataset {
        let mut documents: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for m in &mentions {
            documents.entry(m.doc_id.clone()).or_default().push(m.id.clone());
        }
        Dataset {
            mentions,
            kb_ref,
            documents,
        }
    }

    pub fn len(&self) -> usize {
        self.mentions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mentions.is_empty()
    }

    /// doc_id -> mention ids, documents in ascending id order.
    pub fn documents(&self) -> &BTreeMap<String, Vec<String>> {
        &self.documents
    }

    pub fn get(&self, mention_id: &str) -> Option<&Mention> {
        self.mentions.iter().find(|m| m.id == mention_id)
    }

    /// Distinct non-NIL gold ids.
    pub fn gold_entities(&self) -> BTreeSet<&str> {
        self.mentions.iter().filter_map(|m| m.gold.entity_id()).collect()
    }
}

fn validate_mention(m: &Mention, kb: Option<&KnowledgeBase>) -> Result<()> {
    if m.id.is_empty() {
        return Err(Error::InvalidData("mention with empty id".into()));
    }
    if m.surface.is_empty() || !m.sentence.contains(&m.surface) {
        return Err(Error::InvalidData(format!(
            "mention {}: surface {:?} is not a substring of its sentence",
            m.id, m.surface
        )));
    }
    if let (Some(kb), Link::Entity(id)) = (kb, &m.gold) {
        if !kb.contains(id) {
            return Err(Error::Referential {
                id: id.clone(),
                context: format!("mention {}", m.id),
            });
        }
    }
    Ok(())
}

/// Gold-link frequency per entity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopularityTable {
    pub counts: BTreeMap<String, u64>,
}

impl PopularityTable {
    pub fn get(&self, id: &str) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}
