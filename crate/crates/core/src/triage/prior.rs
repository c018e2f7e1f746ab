use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamodel::normalize_surface;
use crate::error::{Error, Result};

/// One alias-table observation: `surface` linked to `target` `count` times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub surface: String,
    pub target: String,
    pub count: u64,
}

/// P(target | surface) rows keyed by (optionally normalized) surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorTable {
    pub normalize: bool,
    table: BTreeMap<String, Vec<(String, f64)>>,
}

impl PriorTable {
    pub fn key(&self, surface: &str) -> String {
        if self.normalize {
            normalize_surface(surface)
        } else {
            surface.to_string()
        }
    }

    /// Row for `surface`, sorted by descending probability then id.
    pub fn row(&self, surface: &str) -> &[(String, f64)] {
        self.table.get(&self.key(surface)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[(String, f64)])> {
        self.table.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// Normalizes anchor counts into per-surface distributions. Zero counts are
/// ignored.
pub fn build_prior<'a>(anchors: impl IntoIterator<Item = &'a Anchor>, normalize: bool) -> PriorTable {
    let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for a in anchors {
        if a.count == 0 {
            continue;
        }
        let key = if normalize {
            normalize_surface(&a.surface)
        } else {
            a.surface.clone()
        };
        *counts.entry(key).or_default().entry(a.target.clone()).or_insert(0) += a.count;
    }
    let table = counts
        .into_iter()
        .map(|(surface, targets)| {
            let total: u64 = targets.values().sum();
            let mut row: Vec<(String, f64)> = targets
                .into_iter()
                .map(|(t, c)| (t, c as f64 / total as f64))
                .collect();
            row.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            (surface, row)
        })
        .collect();
    PriorTable { normalize, table }
}

/// Reads `surface \t target_id \t count` lines.
pub fn parse_anchors_tsv(reader: impl BufRead) -> Result<Vec<Anchor>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let count: i64 = fields[2].trim().parse().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad count {:?}: {e}", fields[2]),
        })?;
        if count < 0 {
            return Err(Error::InvalidData(format!("line {line_no}: negative count {count}")));
        }
        out.push(Anchor {
            surface: fields[0].to_string(),
            target: fields[1].to_string(),
            count: count as u64,
        });
    }
    Ok(out)
}

pub fn read_anchors_tsv(path: &Path) -> Result<Vec<Anchor>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_anchors_tsv(BufReader::new(file))
}

pub fn write_anchors_tsv(path: &Path, anchors: &[Anchor]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for a in anchors {
        if a.surface.contains(['\t', '\n']) || a.target.contains(['\t', '\n']) {
            return Err(Error::InvalidData(format!("anchor {:?} contains a tab or newline", a.surface)));
        }
        writeln!(w, "{}\t{}\t{}", a.surface, a.target, a.count).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
