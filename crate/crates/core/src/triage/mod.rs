//! Candidate generation from an alias-count prior, with an optional
//! title-to-entity expansion step.

mod candidates;
mod prior;

use std::path::Path;

pub use candidates::{
    allocate_slots, candidates, expand_kb, triage_dataset, triage_recall, Candidate,
    CandidateSet, TriageConfig,
};
pub use prior::{
    build_prior, parse_anchors_tsv, read_anchors_tsv, write_anchors_tsv, Anchor, PriorTable,
};

use crate::datamodel::io::{read_jsonl, write_jsonl};
use crate::error::Result;

pub fn write_candidates(path: &Path, sets: &[CandidateSet]) -> Result<()> {
    write_jsonl(path, sets)
}

pub fn read_candidates(path: &Path) -> Result<Vec<CandidateSet>> {
    read_jsonl(path)
}
