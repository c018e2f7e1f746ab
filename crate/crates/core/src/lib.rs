//! Cross-language entity linking.
//!
//! Mentions in any language are linked to an English knowledge base in two
//! stages: an alias-count prior proposes candidates ([`triage`]), and a
//! three-branch neural ranker scores each (mention, entity) pair from name,
//! context and type features ([`ranker`]). Mentions whose candidates all
//! score below a threshold are predicted NIL ([`inference`]).

pub mod cli;
pub mod datamodel;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod inference;
pub mod ranker;
pub mod triage;

pub use error::{Error, Result};
