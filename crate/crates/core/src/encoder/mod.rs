//! Embedding store I/O, type vocabularies, feature bundles and the hashing
//! test encoder.

mod bundle;
mod hashing;
mod store;
mod vocab;

pub use bundle::{
    assemble_entity, assemble_mention, encode_corpus, entity_key, mention_key,
    FeatureSpace, RepresentationBundle, TestEncoderConfig,
};
pub use hashing::{cosine, test_encode};
pub use store::{EmbeddingStore, STORE_MAGIC, STORE_VERSION};
pub(crate) use store::ByteReader;
pub use vocab::{build_type_vocab, type_onehot, TypeVocab};
