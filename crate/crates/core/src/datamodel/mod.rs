//! Mentions, entities, knowledge bases and datasets, plus the split and
//! reduction operations applied to training data.

pub mod io;
mod reduce;
pub mod synth;
mod types;

pub use reduce::{
    popularity_counts, reduce_by_entity_cap, reduce_random, reduce_tail, remove_eval_entities,
    split_by_document,
};
pub use synth::{synth_generate, SynthConfig, SynthCorpus, PIVOT_LANGUAGE};
pub use types::{
    normalize_surface, Dataset, Entity, KnowledgeBase, Link, Mention, PopularityTable, NIL,
};
