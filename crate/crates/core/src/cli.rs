//! Command-line driver for the whole pipeline.
//!
//! Every subcommand reads an optional JSON [`CliConfig`], applies flag
//! overrides, writes its artifact and a run manifest next to it. Failures
//! print a single `error kind=... code=... message=...` line on stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datamodel::io::{load_kb, load_mentions, write_kb, write_mentions};
use crate::datamodel::{popularity_counts, split_by_document, synth_generate, Dataset, KnowledgeBase, SynthConfig};
use crate::encoder::{build_type_vocab, encode_corpus, EmbeddingStore, FeatureSpace, TestEncoderConfig, TypeVocab};
use crate::error::{Error, Result};
use crate::eval::{evaluate, format_table, EvalReport};
use crate::experiments::{
    grid, read_name_pairs_tsv, result_table, results_csv, results_markdown, DataRegistry, DataSource,
    ExperimentResult, ExperimentSpec, Harness, HarnessConfig,
};
use crate::inference::{
    link_dataset, read_predictions, rerank_popularity, write_predictions, DEFAULT_RERANK_TOP_N, DEFAULT_THRESHOLD,
};
use crate::ranker::{read_checkpoint, train, write_checkpoint, write_loss_trace, BranchMask, TrainConfig};
use crate::triage::{
    build_prior, read_anchors_tsv, read_candidates, triage_dataset, triage_recall, write_anchors_tsv,
    write_candidates, PriorTable, TriageConfig,
};

/// Default artifact locations; subcommand flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub kb: Option<PathBuf>,
    pub mentions: Option<PathBuf>,
    pub anchors: Option<PathBuf>,
    pub prior: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub paths: Paths,
    /// Seeds corpus generation, document splits and training.
    pub seed: u64,
    pub synth: SynthConfig,
    pub encoder: TestEncoderConfig,
    pub triage: TriageConfig,
    pub train: TrainConfig,
    pub mask: BranchMask,
    pub threshold: f64,
    pub type_min_count: u64,
    /// Held-out document fraction for `ingest` and file-backed experiments.
    pub eval_fraction: f64,
    pub rerank_top_n: usize,
    pub experiments: Vec<ExperimentSpec>,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            paths: Paths::default(),
            seed: 0,
            synth: SynthConfig::default(),
            encoder: TestEncoderConfig::default(),
            triage: TriageConfig::default(),
            train: TrainConfig::default(),
            mask: BranchMask::ALL,
            threshold: DEFAULT_THRESHOLD,
            type_min_count: 0,
            eval_fraction: 0.2,
            rerank_top_n: DEFAULT_RERANK_TOP_N,
            experiments: Vec::new(),
        }
    }
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Hex sha256 of the canonical JSON form.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}

#[derive(Debug, Parser)]
#[command(name = "xlel", version, about = "Cross-language entity linking pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the config, including experiment seed lists.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// NIL when the best score is strictly below this value.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Active ranker branches for `train`, e.g. `name,context`; `predict` reads
    /// the mask stored next to the checkpoint.
    #[arg(long, global = true)]
    pub mask: Option<BranchMask>,
    /// Top-k prior entries per mention.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Entity budget of the two-step KB expansion.
    #[arg(long, global = true)]
    pub l: Option<usize>,
    /// Output artifact (a directory for `synth`, `ingest` and `experiment`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a KB and mention file and split the mentions by document.
    Ingest(DataArgs),
    /// Generate a synthetic multilingual corpus.
    Synth,
    /// Build the alias prior from anchor counts.
    BuildPrior {
        #[arg(long)]
        anchors: Option<PathBuf>,
    },
    /// Candidate sets for every mention.
    Triage {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        prior: Option<PathBuf>,
    },
    /// Encode a KB and mentions with the hashing test encoder.
    EncodeTest(DataArgs),
    /// Train the ranker and write a checkpoint.
    Train {
        #[command(flatten)]
        model: ModelInputs,
        /// Tab-separated transliteration pairs for the name-match objective.
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Link mentions with a trained checkpoint.
    Predict {
        #[command(flatten)]
        model: ModelInputs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Mentions whose gold links define the popularity used to re-rank.
        #[arg(long)]
        popularity: Option<PathBuf>,
    },
    /// Score predictions against gold links.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Run the experiment specs of the config.
    Experiment,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub kb: Option<PathBuf>,
    #[arg(long)]
    pub mentions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelInputs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    #[arg(long)]
    pub store: Option<PathBuf>,
}

/// Record written next to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Path to hex sha256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// Model-side facts `predict` needs beyond the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub mask: BranchMask,
    pub store_dim: usize,
    pub mention_vocab: TypeVocab,
    pub entity_vocab: TypeVocab,
    pub config_sha256: String,
}

pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    with_suffix(checkpoint, ".model.json")
}

pub fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.json")
    } else {
        with_suffix(out, ".manifest.json")
    }
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

struct Run {
    command: &'static str,
    cfg: CliConfig,
    out: Option<PathBuf>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run {
    fn input(&mut self, flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
        let p = flag
            .or_else(|| fallback.clone())
            .ok_or_else(|| Error::Config(format!("{}: missing --{name} (or paths.{name} in the config)", self.command)))?;
        self.inputs.push(p.clone());
        Ok(p)
    }

    fn out(&self, fallback: &Option<PathBuf>) -> Result<PathBuf> {
        self.out
            .clone()
            .or_else(|| fallback.clone())
            .ok_or_else(|| Error::Config(format!("{}: missing --out", self.command)))
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out(&None)?;
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }

    fn write_manifest(&self, at: &Path) -> Result<()> {
        let hashes = |paths: &[PathBuf]| -> Result<BTreeMap<String, String>> {
            paths.iter().map(|p| Ok((p.display().to_string(), file_sha256(p)?))).collect()
        };
        let m = Manifest {
            command: self.command.to_string(),
            config_sha256: self.cfg.sha256(),
            seed: self.cfg.seed,
            inputs: hashes(&self.inputs)?,
            outputs: hashes(&self.outputs)?,
        };
        write_text(at, &(serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n"))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn resolve_config(g: &GlobalArgs) -> Result<CliConfig> {
    let mut cfg = match &g.config {
        Some(p) => CliConfig::load(p)?,
        None => CliConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
        for spec in &mut cfg.experiments {
            spec.seeds = vec![s];
        }
    }
    if let Some(t) = g.threshold {
        cfg.threshold = t;
    }
    if let Some(m) = g.mask {
        cfg.mask = m;
    }
    if let Some(k) = g.k {
        cfg.triage.k = k;
    }
    if let Some(l) = g.l {
        cfg.triage.l = l;
    }
    cfg.synth.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    cfg.triage.validate()?;
    cfg.train.validate()?;
    if !cfg.threshold.is_finite() {
        return Err(Error::Config(format!("threshold must be finite, got {}", cfg.threshold)));
    }
    if !(cfg.eval_fraction >= 0.0 && cfg.eval_fraction < 1.0) {
        return Err(Error::Config(format!("eval_fraction must be in [0, 1), got {}", cfg.eval_fraction)));
    }
    for spec in &cfg.experiments {
        spec.validate()?;
    }
    Ok(cfg)
}

/// Name pairs are encoded with the configured test encoder, so its width must
/// match the store.
fn check_store_dim(store: &EmbeddingStore, cfg: &CliConfig) -> Result<()> {
    if store.dim() != cfg.encoder.dim {
        return Err(Error::DimMismatch(format!(
            "store has dimension {} but encoder.dim is {}",
            store.dim(),
            cfg.encoder.dim
        )));
    }
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.global)?;
    let name = match &cli.command {
        Command::Ingest(_) => "ingest",
        Command::Synth => "synth",
        Command::BuildPrior { .. } => "build-prior",
        Command::Triage { .. } => "triage",
        Command::EncodeTest(_) => "encode-test",
        Command::Train { .. } => "train",
        Command::Predict { .. } => "predict",
        Command::Evaluate { .. } => "evaluate",
        Command::Experiment => "experiment",
    };
    let mut run = Run {
        command: name,
        cfg,
        out: cli.global.out.clone(),
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    if let Some(c) = &cli.global.config {
        run.inputs.push(c.clone());
    }
    let manifest = match cli.command {
        Command::Synth => cmd_synth(&mut run)?,
        Command::Ingest(d) => cmd_ingest(&mut run, d)?,
        Command::BuildPrior { anchors } => cmd_build_prior(&mut run, anchors)?,
        Command::Triage { data, prior } => cmd_triage(&mut run, data, prior)?,
        Command::EncodeTest(d) => cmd_encode(&mut run, d)?,
        Command::Train { model, pairs } => cmd_train(&mut run, model, pairs)?,
        Command::Predict {
            model,
            checkpoint,
            popularity,
        } => cmd_predict(&mut run, model, checkpoint, popularity)?,
        Command::Evaluate { data, predictions } => cmd_evaluate(&mut run, data, predictions)?,
        Command::Experiment => cmd_experiment(&mut run)?,
    };
    run.write_manifest(&manifest)
}

fn load_data(run: &mut Run, d: DataArgs) -> Result<(KnowledgeBase, Dataset)> {
    let paths = run.cfg.paths.clone();
    let kb_path = run.input(d.kb, &paths.kb, "kb")?;
    let mentions_path = run.input(d.mentions, &paths.mentions, "mentions")?;
    let kb = load_kb(&kb_path)?;
    let ds = load_mentions(&mentions_path, &kb)?;
    Ok((kb, ds))
}

fn cmd_synth(run: &mut Run) -> Result<PathBuf> {
    let dir = run.out_dir()?;
    let corpus = synth_generate(&run.cfg.synth)?;
    let all = Dataset::concat(corpus.datasets.values())?;
    let kb = dir.join("kb.jsonl");
    let mentions = dir.join("mentions.jsonl");
    let anchors = dir.join("anchors.tsv");
    write_kb(&kb, &corpus.kb)?;
    write_mentions(&mentions, &all)?;
    write_anchors_tsv(&anchors, &corpus.anchors)?;
    run.outputs.extend([kb, mentions, anchors]);
    for (lang, pairs) in &corpus.name_pairs {
        let p = dir.join(format!("pairs.{lang}.tsv"));
        let body: String = pairs.iter().map(|(s, e)| format!("{s}\t{e}\n")).collect();
        write_text(&p, &body)?;
        run.outputs.push(p);
    }
    println!(
        "synth: {} entities, {} mentions in {} languages -> {}",
        corpus.kb.len(),
        all.len(),
        corpus.datasets.len(),
        dir.display()
    );
    Ok(manifest_path(&dir, true))
}

fn cmd_ingest(run: &mut Run, d: DataArgs) -> Result<PathBuf> {
    let (_, ds) = load_data(run, d)?;
    let dir = run.out_dir()?;
    let (train_part, eval_part) = split_by_document(&ds, run.cfg.eval_fraction, run.cfg.seed)?;
    let train_path = dir.join("train.jsonl");
    let eval_path = dir.join("eval.jsonl");
    write_mentions(&train_path, &train_part)?;
    write_mentions(&eval_path, &eval_part)?;
    run.outputs.extend([train_path, eval_path]);
    println!(
        "ingest: {} mentions in {} documents -> {} train, {} eval",
        ds.len(),
        ds.documents().len(),
        train_part.len(),
        eval_part.len()
    );
    Ok(manifest_path(&dir, true))
}

fn cmd_build_prior(run: &mut Run, anchors: Option<PathBuf>) -> Result<PathBuf> {
    let paths = run.cfg.paths.clone();
    let path = run.input(anchors, &paths.anchors, "anchors")?;
    let table = build_prior(&read_anchors_tsv(&path)?, run.cfg.triage.normalize);
    let out = run.out(&paths.prior)?;
    write_json(&out, &table)?;
    run.outputs.push(out.clone());
    println!("build-prior: {} surfaces -> {}", table.len(), out.display());
    Ok(manifest_path(&out, false))
}

fn cmd_triage(run: &mut Run, d: DataArgs, prior: Option<PathBuf>) -> Result<PathBuf> {
    let paths = run.cfg.paths.clone();
    let (kb, ds) = load_data(run, d)?;
    let prior_path = run.input(prior, &paths.prior, "prior")?;
    let table: PriorTable = read_json(&prior_path)?;
    let sets = triage_dataset(&ds, &table, &kb, &run.cfg.triage)?;
    let out = run.out(&paths.candidates)?;
    write_candidates(&out, &sets)?;
    run.outputs.push(out.clone());
    println!(
        "triage: {} mentions, recall {:.4} (k = {}) -> {}",
        ds.len(),
        triage_recall(&sets, &ds),
        run.cfg.triage.k,
        out.display()
    );
    Ok(manifest_path(&out, false))
}

fn cmd_encode(run: &mut Run, d: DataArgs) -> Result<PathBuf> {
    let paths = run.cfg.paths.clone();
    let (kb, ds) = load_data(run, d)?;
    let store = encode_corpus(&kb, [&ds], run.cfg.encoder)?;
    let out = run.out(&paths.store)?;
    store.write(&out)?;
    run.outputs.push(out.clone());
    println!("encode-test: {} vectors of dimension {} -> {}", store.len(), store.dim(), out.display());
    Ok(manifest_path(&out, false))
}

struct Loaded {
    kb: KnowledgeBase,
    ds: Dataset,
    cands: Vec<crate::triage::CandidateSet>,
    store: EmbeddingStore,
}

fn load_model_inputs(run: &mut Run, m: ModelInputs) -> Result<Loaded> {
    let paths = run.cfg.paths.clone();
    let (kb, ds) = load_data(run, m.data)?;
    let cands_path = run.input(m.candidates, &paths.candidates, "candidates")?;
    let store_path = run.input(m.store, &paths.store, "store")?;
    Ok(Loaded {
        kb,
        ds,
        cands: read_candidates(&cands_path)?,
        store: EmbeddingStore::read(&store_path)?,
    })
}

fn cmd_train(run: &mut Run, m: ModelInputs, pairs: Option<PathBuf>) -> Result<PathBuf> {
    let paths = run.cfg.paths.clone();
    let data = load_model_inputs(run, m)?;
    let pairs = pairs.or(paths.pairs.clone());
    let mut tcfg = run.cfg.train.clone();
    let aux_pairs = match pairs {
        Some(p) => {
            run.inputs.push(p.clone());
            check_store_dim(&data.store, &run.cfg)?;
            if tcfg.aux.is_none() {
                tcfg.aux = Some(Default::default());
            }
            read_name_pairs_tsv(&p)?
                .iter()
                .map(|(s, e)| Ok((run.cfg.encoder.encode(s)?, run.cfg.encoder.encode(e)?)))
                .collect::<Result<Vec<_>>>()?
        }
        None => {
            tcfg.aux = None;
            Vec::new()
        }
    };
    // Align candidate sets with the training mentions.
    let by_id: BTreeMap<&str, &crate::triage::CandidateSet> =
        data.cands.iter().map(|c| (c.mention_id.as_str(), c)).collect();
    let cands = data
        .ds
        .mentions
        .iter()
        .map(|mention| {
            by_id.get(mention.id.as_str()).map(|c| (*c).clone()).ok_or_else(|| Error::Referential {
                id: mention.id.clone(),
                context: "candidate file".into(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (mention_vocab, entity_vocab) = build_type_vocab(&data.ds, &data.kb, run.cfg.type_min_count);
    let features = FeatureSpace {
        store: &data.store,
        kb: &data.kb,
        mention_vocab: &mention_vocab,
        entity_vocab: &entity_vocab,
    };
    let outcome = train(&data.ds, &cands, features, &tcfg, run.cfg.mask, &aux_pairs)?;
    let out = run.out(&paths.checkpoint)?;
    write_checkpoint(&out, &outcome.params)?;
    let sidecar = sidecar_path(&out);
    write_json(
        &sidecar,
        &ModelSidecar {
            mask: run.cfg.mask,
            store_dim: data.store.dim(),
            mention_vocab,
            entity_vocab,
            config_sha256: run.cfg.sha256(),
        },
    )?;
    let trace = with_suffix(&out, ".loss.csv");
    write_loss_trace(&trace, &outcome.trace)?;
    run.outputs.extend([out.clone(), sidecar, trace]);
    let last = outcome.trace.last().map(|s| s.main_loss).unwrap_or(f64::NAN);
    println!(
        "train: {} examples, {} epochs, final loss {last:.5} -> {}",
        outcome.n_examples,
        outcome.trace.len(),
        out.display()
    );
    Ok(manifest_path(&out, false))
}

fn cmd_predict(run: &mut Run, m: ModelInputs, checkpoint: Option<PathBuf>, popularity: Option<PathBuf>) -> Result<PathBuf> {
    let paths = run.cfg.paths.clone();
    let data = load_model_inputs(run, m)?;
    let ckpt = run.input(checkpoint, &paths.checkpoint, "checkpoint")?;
    let sidecar_file = sidecar_path(&ckpt);
    run.inputs.push(sidecar_file.clone());
    let sidecar: ModelSidecar = read_json(&sidecar_file)?;
    let params = read_checkpoint(&ckpt)?;
    if sidecar.store_dim != data.store.dim() {
        return Err(Error::DimMismatch(format!(
            "checkpoint was trained on dimension {} but the store has {}",
            sidecar.store_dim,
            data.store.dim()
        )));
    }
    let features = FeatureSpace {
        store: &data.store,
        kb: &data.kb,
        mention_vocab: &sidecar.mention_vocab,
        entity_vocab: &sidecar.entity_vocab,
    };
    let mut preds = link_dataset(&data.ds, &data.cands, features, &params, sidecar.mask, run.cfg.threshold)?;
    if let Some(p) = popularity {
        run.inputs.push(p.clone());
        let pop = popularity_counts(&load_mentions(&p, &data.kb)?);
        preds = preds.iter().map(|x| rerank_popularity(x, &pop, run.cfg.rerank_top_n)).collect();
    }
    let out = run.out(&paths.predictions)?;
    write_predictions(&out, &preds)?;
    run.outputs.push(out.clone());
    let nil = preds.iter().filter(|p| p.predicted.is_nil()).count();
    println!("predict: {} mentions, {nil} NIL -> {}", preds.len(), out.display());
    Ok(manifest_path(&out, false))
}

fn cmd_evaluate(run: &mut Run, d: DataArgs, predictions: Option<PathBuf>) -> Result<PathBuf> {
    let paths = run.cfg.paths.clone();
    let (_, ds) = load_data(run, d)?;
    let pred_path = run.input(predictions, &paths.predictions, "predictions")?;
    let report: EvalReport = evaluate(&read_predictions(&pred_path)?, &ds)?;
    print!("{}", format_table(&[("all".to_string(), report)]));
    let out = run.out(&None)?;
    write_json(&out, &report)?;
    run.outputs.push(out.clone());
    Ok(manifest_path(&out, false))
}

/// Registry from the configured KB, mentions and anchors; every language in
/// the mention file is split by document.
fn file_registry(run: &mut Run) -> Result<DataRegistry> {
    let paths = run.cfg.paths.clone();
    let (kb, ds) = load_data(
        run,
        DataArgs {
            kb: None,
            mentions: None,
        },
    )?;
    let anchors = run.input(None, &paths.anchors, "anchors")?;
    let mut by_lang: BTreeMap<String, Vec<crate::datamodel::Mention>> = BTreeMap::new();
    for m in &ds.mentions {
        by_lang.entry(m.language.clone()).or_default().push(m.clone());
    }
    let (mut train_sets, mut eval_sets) = (BTreeMap::new(), BTreeMap::new());
    for (lang, mentions) in by_lang {
        let part = Dataset::new(mentions, ds.kb_ref.clone(), None)?;
        let (a, b) = split_by_document(&part, run.cfg.eval_fraction, run.cfg.seed)?;
        train_sets.insert(lang.clone(), a);
        eval_sets.insert(lang, b);
    }
    let mut name_pairs = BTreeMap::new();
    if let Some(p) = &paths.pairs {
        run.inputs.push(p.clone());
        name_pairs.insert("pairs".to_string(), read_name_pairs_tsv(p)?);
    }
    let store = encode_corpus(&kb, [&ds], run.cfg.encoder)?;
    Ok(DataRegistry {
        prior: build_prior(&read_anchors_tsv(&anchors)?, run.cfg.triage.normalize),
        kb,
        train: train_sets,
        eval: eval_sets,
        name_pairs,
        store,
        encoder: run.cfg.encoder,
    })
}

fn cmd_experiment(run: &mut Run) -> Result<PathBuf> {
    if run.cfg.experiments.is_empty() {
        return Err(Error::Config("experiment: the config lists no experiments".into()));
    }
    let source = if run.cfg.paths.kb.is_some() {
        DataSource::Fixed(Rc::new(file_registry(run)?))
    } else {
        DataSource::Synthetic {
            synth: run.cfg.synth.clone(),
            eval_fraction: run.cfg.eval_fraction,
            encoder: run.cfg.encoder,
        }
    };
    let hcfg = HarnessConfig {
        triage: run.cfg.triage,
        train: run.cfg.train.clone(),
        type_min_count: run.cfg.type_min_count,
        rerank_top_n: run.cfg.rerank_top_n,
    };
    let mut harness = Harness::new(source, hcfg)?;
    let results: Vec<ExperimentResult> = harness.run_all(&run.cfg.experiments.clone())?;
    let dir = run.out_dir()?;
    let g = grid(&results);
    let files = [
        ("results.json", serde_json::to_string_pretty(&results).map_err(|e| Error::Format(e.to_string()))? + "\n"),
        ("results.csv", results_csv(&results)),
        ("results.md", results_markdown(&results)),
        ("grid.csv", g.to_csv()),
        ("grid.md", g.to_markdown()),
    ];
    for (name, body) in files {
        let p = dir.join(name);
        write_text(&p, &body)?;
        run.outputs.push(p);
    }
    let mut stdout = std::io::stdout().lock();
    for r in &results {
        let _ = writeln!(stdout, "{}\n{}", r.spec.name, result_table(r));
    }
    Ok(manifest_path(&dir, true))
}

/// One parseable line: `error kind=<kind> code=<exit code> message=<json string>`.
pub fn error_line(e: &Error) -> String {
    format!(
        "error kind={} code={} message={}",
        e.kind(),
        e.exit_code(),
        serde_json::to_string(&e.to_string()).expect("string serializes")
    )
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!(
                "error kind=usage code=2 message={}",
                serde_json::to_string(&first).expect("string serializes")
            );
            return 2;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            e.exit_code()
        }
    }
}
