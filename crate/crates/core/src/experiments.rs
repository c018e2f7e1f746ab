//! Config-driven experiment grids: mono/multi training, zero-shot transfer,
//! branch ablations, training-set reductions, name-match pre-training and
//! popularity re-ranking.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datamodel::{
    popularity_counts, reduce_by_entity_cap, reduce_random, reduce_tail, remove_eval_entities, split_by_document,
    synth_generate, Dataset, KnowledgeBase, PopularityTable, SynthConfig,
};
use crate::encoder::{build_type_vocab, encode_corpus, EmbeddingStore, FeatureSpace, TestEncoderConfig, TypeVocab};
use crate::error::{Error, Result};
use crate::eval::{evaluate, format_table, EvalCounts, EvalReport};
use crate::inference::{link_dataset, rerank_popularity, DEFAULT_RERANK_TOP_N, DEFAULT_THRESHOLD};
use crate::ranker::{checkpoint_bytes, train, BranchMask, EpochStats, RankerParams, TrainConfig};
use crate::triage::{build_prior, triage_dataset, PriorTable, TriageConfig};

/// Label of the pooled row in every result table.
pub const POOLED: &str = "all";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    None,
    /// Random fraction of mentions, whole documents at a time.
    Random(f64),
    /// Fraction of linked mentions taken from the least frequent entities.
    Tail(f64),
    /// Entities with at most `n` training mentions.
    Cap(usize),
    /// `Cap(n)` minus every entity that occurs in the evaluation sets.
    CapUnseen(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopularitySource {
    /// Gold counts of the full training splits of the spec's training
    /// languages, before any reduction.
    Train,
    /// Gold counts of the training splits of every language in the registry.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rerank {
    None,
    Popularity(PopularitySource),
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_reduction() -> Reduction {
    Reduction::None
}

fn default_rerank() -> Rerank {
    Rerank::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub train_languages: Vec<String>,
    pub eval_languages: Vec<String>,
    #[serde(default)]
    pub mask: BranchMask,
    #[serde(default = "default_reduction")]
    pub reduction: Reduction,
    /// A name-pair set of the registry (by language) or a two-column TSV path.
    #[serde(default)]
    pub aux_pairs: Option<String>,
    #[serde(default = "default_rerank")]
    pub rerank: Rerank,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

impl ExperimentSpec {
    pub fn new(name: impl Into<String>, train: &[&str], eval: &[&str]) -> Self {
        ExperimentSpec {
            name: name.into(),
            train_languages: train.iter().map(|s| s.to_string()).collect(),
            eval_languages: eval.iter().map(|s| s.to_string()).collect(),
            mask: BranchMask::ALL,
            reduction: Reduction::None,
            aux_pairs: None,
            rerank: Rerank::None,
            threshold: DEFAULT_THRESHOLD,
            seeds: default_seeds(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_languages.is_empty() || self.eval_languages.is_empty() {
            return Err(Error::Config(format!("{}: train and eval languages must be non-empty", self.name)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config(format!("{}: at least one seed is required", self.name)));
        }
        let fraction_ok = |f: f64| f > 0.0 && f < 1.0;
        match self.reduction {
            Reduction::Random(f) | Reduction::Tail(f) if !fraction_ok(f) => {
                Err(Error::Config(format!("{}: reduction fraction must be in (0, 1), got {f}", self.name)))
            }
            Reduction::Cap(0) | Reduction::CapUnseen(0) => {
                Err(Error::Config(format!("{}: entity cap must be at least 1", self.name)))
            }
            _ if !self.threshold.is_finite() => Err(Error::Config(format!("{}: threshold must be finite", self.name))),
            _ => Ok(()),
        }
    }

    /// Column label used by [`grid`].
    pub fn train_label(&self) -> String {
        self.train_languages.join("+")
    }
}

/// Everything one seed of an experiment reads.
pub struct DataRegistry {
    pub kb: KnowledgeBase,
    pub prior: PriorTable,
    pub train: BTreeMap<String, Dataset>,
    pub eval: BTreeMap<String, Dataset>,
    /// `(source name, English name)` pairs by key.
    pub name_pairs: BTreeMap<String, Vec<(String, String)>>,
    pub store: EmbeddingStore,
    /// Encoder for name pairs; must match the one that produced `store`.
    pub encoder: TestEncoderConfig,
}

impl DataRegistry {
    /// Generates a corpus, splits every language by document into train and
    /// evaluation parts and encodes everything with the test encoder.
    pub fn synthetic(synth: &SynthConfig, eval_fraction: f64, encoder: TestEncoderConfig, triage: &TriageConfig) -> Result<Self> {
        let corpus = synth_generate(synth)?;
        let mut train = BTreeMap::new();
        let mut eval = BTreeMap::new();
        for (lang, ds) in &corpus.datasets {
            let (rest, held) = split_by_document(ds, eval_fraction, synth.seed)?;
            train.insert(lang.clone(), rest);
            eval.insert(lang.clone(), held);
        }
        let store = encode_corpus(&corpus.kb, corpus.datasets.values(), encoder)?;
        Ok(DataRegistry {
            prior: build_prior(&corpus.anchors, triage.normalize),
            kb: corpus.kb,
            train,
            eval,
            name_pairs: corpus.name_pairs,
            store,
            encoder,
        })
    }

    fn split<'a>(&self, which: &'a BTreeMap<String, Dataset>, lang: &str) -> Result<&'a Dataset> {
        which
            .get(lang)
            .ok_or_else(|| Error::Config(format!("unknown language key {lang:?}")))
    }

    fn pooled(&self, which: &BTreeMap<String, Dataset>, langs: &[String]) -> Result<Dataset> {
        let parts = langs.iter().map(|l| self.split(which, l)).collect::<Result<Vec<_>>>()?;
        Dataset::concat(parts)
    }

    fn pairs(&self, key: &str) -> Result<Vec<(String, String)>> {
        match self.name_pairs.get(key) {
            Some(p) => Ok(p.clone()),
            None => read_name_pairs_tsv(Path::new(key)),
        }
    }
}

/// Two tab-separated columns per line: source name, English name.
pub fn parse_name_pairs(reader: impl BufRead) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 || cols.iter().any(|c| c.trim().is_empty()) {
            return Err(Error::Parse {
                line: i + 1,
                message: "expected two non-empty tab-separated names".into(),
            });
        }
        out.push((cols[0].to_string(), cols[1].to_string()));
    }
    Ok(out)
}

pub fn read_name_pairs_tsv(path: &Path) -> Result<Vec<(String, String)>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_name_pairs(std::io::BufReader::new(f))
}

/// Source of per-seed registries.
pub enum DataSource {
    /// A fresh corpus per seed, generated with `synth.seed + seed`.
    Synthetic {
        synth: SynthConfig,
        eval_fraction: f64,
        encoder: TestEncoderConfig,
    },
    /// The same data for every seed; only training randomness varies.
    Fixed(Rc<DataRegistry>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub triage: TriageConfig,
    pub train: TrainConfig,
    /// Type tags need strictly more occurrences than this.
    pub type_min_count: u64,
    pub rerank_top_n: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            triage: TriageConfig::default(),
            train: TrainConfig::default(),
            type_min_count: 0,
            rerank_top_n: DEFAULT_RERANK_TOP_N,
        }
    }
}

pub struct TrainedModel {
    pub params: RankerParams,
    pub mention_vocab: TypeVocab,
    pub entity_vocab: TypeVocab,
    pub trace: Vec<EpochStats>,
    pub train_set: Dataset,
    pub checkpoint_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub checkpoint_sha256: String,
    pub n_train_mentions: usize,
    pub reports: Vec<(String, EvalReport)>,
}

/// Seed-averaged metrics of one evaluation language (or the pooled row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub language: String,
    pub micro_avg: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    /// Eval languages in spec order, then the pooled row.
    pub rows: Vec<ResultRow>,
    pub per_seed: Vec<SeedOutcome>,
}

impl ExperimentResult {
    pub fn row(&self, language: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.language == language)
    }

    pub fn pooled(&self) -> &ResultRow {
        self.row(POOLED).expect("every result has a pooled row")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct ModelKey {
    seed: u64,
    train_languages: Vec<String>,
    mask: String,
    reduction: String,
    unseen_against: Vec<String>,
    aux: Option<String>,
}

/// Runs experiment specs, caching registries per seed and trained models per
/// training identity, so specs that differ only in evaluation or re-ranking
/// share one model.
pub struct Harness {
    source: DataSource,
    cfg: HarnessConfig,
    registries: BTreeMap<u64, Rc<DataRegistry>>,
    models: BTreeMap<ModelKey, Rc<TrainedModel>>,
}

impl Harness {
    pub fn new(source: DataSource, cfg: HarnessConfig) -> Result<Self> {
        cfg.train.validate()?;
        cfg.triage.validate()?;
        Ok(Harness {
            source,
            cfg,
            registries: BTreeMap::new(),
            models: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &HarnessConfig {
        &self.cfg
    }

    pub fn registry(&mut self, seed: u64) -> Result<Rc<DataRegistry>> {
        if let Some(r) = self.registries.get(&seed) {
            return Ok(r.clone());
        }
        let r = match &self.source {
            DataSource::Fixed(r) => r.clone(),
            DataSource::Synthetic {
                synth,
                eval_fraction,
                encoder,
            } => {
                let cfg = SynthConfig {
                    seed: synth.seed.wrapping_add(seed),
                    ..synth.clone()
                };
                Rc::new(DataRegistry::synthetic(&cfg, *eval_fraction, *encoder, &self.cfg.triage)?)
            }
        };
        self.registries.insert(seed, r.clone());
        Ok(r)
    }

    /// The model `spec` trains for `seed`, trained on first use.
    pub fn model(&mut self, spec: &ExperimentSpec, seed: u64) -> Result<Rc<TrainedModel>> {
        spec.validate()?;
        let key = ModelKey {
            seed,
            train_languages: spec.train_languages.clone(),
            mask: spec.mask.to_string(),
            reduction: format!("{:?}", spec.reduction),
            unseen_against: match spec.reduction {
                Reduction::CapUnseen(_) => spec.eval_languages.clone(),
                _ => Vec::new(),
            },
            aux: spec.aux_pairs.clone(),
        };
        if let Some(m) = self.models.get(&key) {
            return Ok(m.clone());
        }
        let reg = self.registry(seed)?;
        let pooled = reg.pooled(&reg.train, &spec.train_languages)?;
        let train_set = match spec.reduction {
            Reduction::None => pooled,
            Reduction::Random(f) => reduce_random(&pooled, f, seed)?,
            Reduction::Tail(f) => reduce_tail(&pooled, f)?,
            Reduction::Cap(n) => reduce_by_entity_cap(&pooled, n)?,
            Reduction::CapUnseen(n) => {
                let eval = reg.pooled(&reg.eval, &spec.eval_languages)?;
                remove_eval_entities(&reduce_by_entity_cap(&pooled, n)?, &eval)
            }
        };
        let cands = triage_dataset(&train_set, &reg.prior, &reg.kb, &self.cfg.triage)?;
        let (mention_vocab, entity_vocab) = build_type_vocab(&train_set, &reg.kb, self.cfg.type_min_count);
        let aux_pairs = match &spec.aux_pairs {
            Some(key) => reg
                .pairs(key)?
                .iter()
                .map(|(src, en)| Ok((reg.encoder.encode(src)?, reg.encoder.encode(en)?)))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        let mut tcfg = self.cfg.train.clone();
        tcfg.seed = seed;
        if spec.aux_pairs.is_some() && tcfg.aux.is_none() {
            tcfg.aux = Some(Default::default());
        }
        if spec.aux_pairs.is_none() {
            tcfg.aux = None;
        }
        let features = FeatureSpace {
            store: &reg.store,
            kb: &reg.kb,
            mention_vocab: &mention_vocab,
            entity_vocab: &entity_vocab,
        };
        let outcome = train(&train_set, &cands, features, &tcfg, spec.mask, &aux_pairs)?;
        let checkpoint_sha256 = hex::encode(Sha256::digest(checkpoint_bytes(&outcome.params)));
        let model = Rc::new(TrainedModel {
            params: outcome.params,
            mention_vocab,
            entity_vocab,
            trace: outcome.trace,
            train_set,
            checkpoint_sha256,
        });
        self.models.insert(key, model.clone());
        Ok(model)
    }

    fn run_seed(&mut self, spec: &ExperimentSpec, seed: u64) -> Result<SeedOutcome> {
        let model = self.model(spec, seed)?;
        let reg = self.registry(seed)?;
        let features = FeatureSpace {
            store: &reg.store,
            kb: &reg.kb,
            mention_vocab: &model.mention_vocab,
            entity_vocab: &model.entity_vocab,
        };
        let popularity: Option<PopularityTable> = match spec.rerank {
            Rerank::None => None,
            Rerank::Popularity(PopularitySource::Train) => {
                Some(popularity_counts(&reg.pooled(&reg.train, &spec.train_languages)?))
            }
            Rerank::Popularity(PopularitySource::All) => {
                Some(popularity_counts(&Dataset::concat(reg.train.values())?))
            }
        };
        let mut reports = Vec::new();
        let mut pooled = EvalCounts::default();
        for lang in &spec.eval_languages {
            let ds = reg.split(&reg.eval, lang)?;
            let cands = triage_dataset(ds, &reg.prior, &reg.kb, &self.cfg.triage)?;
            let mut preds = link_dataset(ds, &cands, features, &model.params, spec.mask, spec.threshold)?;
            if let Some(pop) = &popularity {
                preds = preds.iter().map(|p| rerank_popularity(p, pop, self.cfg.rerank_top_n)).collect();
            }
            let report = evaluate(&preds, ds)?;
            pooled.add(&report.counts);
            reports.push((lang.clone(), report));
        }
        reports.push((POOLED.to_string(), EvalReport::from_counts(pooled)));
        Ok(SeedOutcome {
            seed,
            checkpoint_sha256: model.checkpoint_sha256.clone(),
            n_train_mentions: model.train_set.len(),
            reports,
        })
    }

    pub fn run(&mut self, spec: &ExperimentSpec) -> Result<ExperimentResult> {
        spec.validate()?;
        let per_seed = spec
            .seeds
            .iter()
            .map(|&s| self.run_seed(spec, s))
            .collect::<Result<Vec<_>>>()?;
        let n = per_seed.len() as f64;
        let rows = per_seed[0]
            .reports
            .iter()
            .enumerate()
            .map(|(i, (lang, _))| {
                let mean = |f: fn(&EvalReport) -> f64| per_seed.iter().map(|o| f(&o.reports[i].1)).sum::<f64>() / n;
                ResultRow {
                    language: lang.clone(),
                    micro_avg: mean(|r| r.micro_avg),
                    precision: mean(|r| r.precision),
                    recall: mean(|r| r.recall),
                    f1: mean(|r| r.f1),
                }
            })
            .collect();
        Ok(ExperimentResult {
            spec: spec.clone(),
            rows,
            per_seed,
        })
    }

    pub fn run_all(&mut self, specs: &[ExperimentSpec]) -> Result<Vec<ExperimentResult>> {
        specs.iter().map(|s| self.run(s)).collect()
    }
}

/// F1 cross-tabulation: one column per training set, one row per
/// evaluation language, in first-seen order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub columns: Vec<String>,
    pub rows: Vec<String>,
    /// `cells[row][col]`; `None` where no spec covers the pair.
    pub cells: Vec<Vec<Option<f64>>>,
}

pub fn grid(results: &[ExperimentResult]) -> GridReport {
    let mut columns: Vec<String> = Vec::new();
    let mut rows: Vec<String> = Vec::new();
    let mut values: BTreeMap<(String, String), f64> = BTreeMap::new();
    for r in results {
        let col = r.spec.train_label();
        if !columns.contains(&col) {
            columns.push(col.clone());
        }
        for row in &r.rows {
            if row.language == POOLED {
                continue;
            }
            if !rows.contains(&row.language) {
                rows.push(row.language.clone());
            }
            values.insert((row.language.clone(), col.clone()), row.f1);
        }
    }
    let cells = rows
        .iter()
        .map(|r| columns.iter().map(|c| values.get(&(r.clone(), c.clone())).copied()).collect())
        .collect();
    GridReport { columns, rows, cells }
}

impl GridReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eval");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (r, cells) in self.rows.iter().zip(&self.cells) {
            out.push_str(r);
            for v in cells {
                out.push(',');
                if let Some(v) = v {
                    let _ = write!(out, "{v:.4}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        if self.columns.is_empty() {
            return String::new();
        }
        let mut out = String::from("| eval \\ train |");
        for c in &self.columns {
            let _ = write!(out, " {c} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(self.columns.len()));
        out.push('\n');
        for (r, cells) in self.rows.iter().zip(&self.cells) {
            let _ = write!(out, "| {r} |");
            for v in cells {
                match v {
                    Some(v) => {
                        let _ = write!(out, " {v:.3} |");
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// One line per (experiment, language): seed-averaged metrics.
pub fn results_csv(results: &[ExperimentResult]) -> String {
    let mut out = String::from("experiment,language,avg,prec,recall,f1\n");
    for r in results {
        for row in &r.rows {
            let _ = writeln!(
                out,
                "{},{},{:.4},{:.4},{:.4},{:.4}",
                r.spec.name, row.language, row.micro_avg, row.precision, row.recall, row.f1
            );
        }
    }
    out
}

pub fn results_markdown(results: &[ExperimentResult]) -> String {
    let mut out = String::new();
    for r in results {
        let _ = writeln!(out, "### {}\n", r.spec.name);
        out.push_str("| language | avg. | prec. | recall | F1 |\n|---|---:|---:|---:|---:|\n");
        for row in &r.rows {
            let _ = writeln!(
                out,
                "| {} | {:.3} | {:.3} | {:.3} | {:.3} |",
                row.language, row.micro_avg, row.precision, row.recall, row.f1
            );
        }
        out.push('\n');
    }
    out
}

/// Text table of the seed-averaged rows of one result.
pub fn result_table(r: &ExperimentResult) -> String {
    let rows: Vec<(String, EvalReport)> = r
        .rows
        .iter()
        .map(|row| {
            (
                row.language.clone(),
                EvalReport {
                    precision: row.precision,
                    recall: row.recall,
                    f1: row.f1,
                    micro_avg: row.micro_avg,
                    counts: EvalCounts::default(),
                },
            )
        })
        .collect();
    format_table(&rows)
}
