use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use sha2::{Digest, Sha256};

const CONFIG: &str = r#"{
  "seed": 3,
  "synth": {"n_entities": 80, "n_mentions": 300, "languages": ["en", "xx"]},
  "encoder": {"dim": 32},
  "train": {"epochs": 8, "lr": 0.001, "layers": {"name": [16], "context": [16], "types": [4], "head": [16]}},
  "experiments": [{"name": "zero-shot", "train_languages": ["en"], "eval_languages": ["xx"], "seeds": [0, 1]}]
}"#;

/// Argument lists of the full pipeline, run from inside the work directory.
pub const PIPELINE: &[&[&str]] = &[
    &["--out", "data", "synth"],
    &["--out", "split", "ingest", "--kb", "data/kb.jsonl", "--mentions", "data/mentions.jsonl"],
    &["--out", "store.bin", "encode-test", "--kb", "data/kb.jsonl", "--mentions", "data/mentions.jsonl"],
    &["--out", "prior.json", "build-prior", "--anchors", "data/anchors.tsv"],
    &["--out", "cands.jsonl", "triage", "--kb", "data/kb.jsonl", "--mentions", "data/mentions.jsonl", "--prior", "prior.json"],
    &[
        "--out", "model.bin", "train", "--kb", "data/kb.jsonl", "--mentions", "split/train.jsonl",
        "--candidates", "cands.jsonl", "--store", "store.bin", "--pairs", "data/pairs.xx.tsv",
    ],
    &[
        "--out", "preds.jsonl", "predict", "--kb", "data/kb.jsonl", "--mentions", "split/eval.jsonl",
        "--candidates", "cands.jsonl", "--store", "store.bin", "--checkpoint", "model.bin",
        "--popularity", "split/train.jsonl",
    ],
    &["--out", "report.json", "evaluate", "--kb", "data/kb.jsonl", "--mentions", "split/eval.jsonl", "--predictions", "preds.jsonl"],
    &["--out", "experiment", "experiment"],
];

pub fn write_config(dir: &Path) {
    fs::write(dir.join("config.json"), CONFIG).unwrap();
}

/// Runs the pipeline in `dir`; returns an error naming the failed step.
pub fn run_pipeline(dir: &Path) -> Result<(), String> {
    write_config(dir);
    for args in PIPELINE {
        let out = Command::new(env!("CARGO_BIN_EXE_xlel"))
            .current_dir(dir)
            .arg("--config")
            .arg("config.json")
            .args(*args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr).trim()));
        }
    }
    Ok(())
}

fn hash_tree(root: &Path) -> BTreeMap<String, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, hex::encode(Sha256::digest(fs::read(&path).unwrap())));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn cli_determinism() -> Result<String, String> {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_pipeline(a.path())?;
    run_pipeline(b.path())?;
    let (ha, hb) = (hash_tree(a.path()), hash_tree(b.path()));
    let differing: Vec<&String> = ha.keys().filter(|k| ha.get(*k) != hb.get(*k)).collect();
    if ha.keys().ne(hb.keys()) {
        return Err("the two runs produced different file sets".into());
    }
    if differing.is_empty() {
        Ok(format!("{} steps, {} artifacts bit-identical across two runs", PIPELINE.len(), ha.len()))
    } else {
        Err(format!("{} of {} artifacts differ, e.g. {}", differing.len(), ha.len(), differing[0]))
    }
}
