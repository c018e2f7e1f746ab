//! JSONL readers and writers for knowledge bases and mention corpora.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::types::{Dataset, Entity, KnowledgeBase, Mention};
use crate::error::{Error, Result};

/// Parses one JSON object per non-blank line. Line numbers are 1-based.
pub fn parse_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(BufReader::new(file))
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)
            .map_err(|e| Error::Format(format!("serializing {}: {e}", path.display())))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads a KB; its id is the file stem.
pub fn load_kb(path: &Path) -> Result<KnowledgeBase> {
    let entities: Vec<Entity> = read_jsonl(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "kb".to_string());
    KnowledgeBase::new(id, entities)
}

pub fn load_mentions(path: &Path, kb: &KnowledgeBase) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    mentions_from_reader(BufReader::new(file), kb)
}

pub fn mentions_from_reader(reader: impl BufRead, kb: &KnowledgeBase) -> Result<Dataset> {
    let mentions: Vec<Mention> = parse_jsonl(reader)?;
    Dataset::new(mentions, kb.id.clone(), Some(kb))
}

pub fn write_kb(path: &Path, kb: &KnowledgeBase) -> Result<()> {
    write_jsonl(path, kb.entities())
}

pub fn write_mentions(path: &Path, ds: &Dataset) -> Result<()> {
    write_jsonl(path, &ds.mentions)
}
