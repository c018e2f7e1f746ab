//! Scaled-down experiment patterns on synthetic corpora. Every run uses the
//! hashing test encoder and the default NIL threshold of -1.

use xlel::datamodel::SynthConfig;
use xlel::encoder::TestEncoderConfig;
use xlel::experiments::{
    DataSource, ExperimentResult, ExperimentSpec, Harness, HarnessConfig, PopularitySource, Reduction, Rerank,
};
use xlel::ranker::{BranchMask, LayerSizes, TrainConfig};

const EVAL_FRACTION: f64 = 0.2;

fn synth(languages: &[&str]) -> SynthConfig {
    SynthConfig {
        n_entities: 200,
        n_mentions: 1000,
        languages: languages.iter().map(|l| l.to_string()).collect(),
        nil_rate: 0.1,
        context_informativeness: 0.8,
        ..SynthConfig::default()
    }
}

fn harness(synth: SynthConfig, epochs: usize) -> Harness {
    let cfg = HarnessConfig {
        train: TrainConfig {
            lr: 1e-3,
            epochs,
            layers: LayerSizes {
                name: vec![64],
                context: vec![64],
                types: vec![8],
                head: vec![64],
            },
            ..TrainConfig::default()
        },
        ..HarnessConfig::default()
    };
    let source = DataSource::Synthetic {
        synth,
        eval_fraction: EVAL_FRACTION,
        encoder: TestEncoderConfig { dim: 64, seed: 0 },
    };
    Harness::new(source, cfg).expect("valid harness config")
}

fn run(h: &mut Harness, spec: &ExperimentSpec) -> Result<ExperimentResult, String> {
    h.run(spec).map_err(|e| format!("{}: {e}", spec.name))
}

fn per_seed_f1(r: &ExperimentResult) -> String {
    let v: Vec<String> = r.per_seed.iter().map(|s| format!("{:.3}", s.reports.last().unwrap().1.f1)).collect();
    v.join("/")
}

fn verdict(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// One language, unambiguous surfaces; scored on held-out documents.
pub fn learnability() -> Result<String, String> {
    let mut cfg = synth(&["en"]);
    cfg.ambiguity = 0.0;
    let epochs = 50;
    let mut h = harness(cfg, epochs);
    let mut spec = ExperimentSpec::new("separable", &["en"], &["en"]);
    spec.seeds = vec![0];
    let r = run(&mut h, &spec)?;
    let row = r.pooled();
    verdict(
        row.f1 >= 0.95 && row.micro_avg >= 0.90,
        format!("{epochs} epochs, held-out F1 {:.3} (>= 0.95), micro {:.3} (>= 0.90)", row.f1, row.micro_avg),
    )
}

pub fn zero_shot() -> Result<String, String> {
    let mut h = harness(synth(&["en", "xx"]), 50);
    let multi = run(&mut h, &ExperimentSpec::new("multi", &["en", "xx"], &["xx"]))?;
    let zero = run(&mut h, &ExperimentSpec::new("zero-shot", &["en"], &["xx"]))?;
    let gap = multi.pooled().f1 - zero.pooled().f1;
    verdict(
        (0.0..=0.2).contains(&gap),
        format!(
            "multi F1 {:.3} [{}], zero-shot F1 {:.3} [{}], gap {gap:.3} in [0, 0.2]",
            multi.pooled().f1,
            per_seed_f1(&multi),
            zero.pooled().f1,
            per_seed_f1(&zero)
        ),
    )
}

pub fn ablation() -> Result<String, String> {
    let mut h = harness(synth(&["en"]), 50);
    let mut f1 = Vec::new();
    for (name, mask) in [("all", BranchMask::ALL), ("name", BranchMask::NAME_ONLY), ("context", BranchMask::CONTEXT_ONLY)] {
        let mut spec = ExperimentSpec::new(name, &["en"], &["en"]);
        spec.mask = mask;
        f1.push(run(&mut h, &spec)?.pooled().f1);
    }
    let (all, name, ctx) = (f1[0], f1[1], f1[2]);
    let retained = if all > 0.0 { name / all } else { 0.0 };
    verdict(
        all >= name && name >= ctx && retained >= 0.8,
        format!("F1 all {all:.3} >= name {name:.3} >= context {ctx:.3}, name retains {:.0}% (>= 80%)", 100.0 * retained),
    )
}

pub fn aux_objective() -> Result<String, String> {
    let mut h = harness(synth(&["en", "xx"]), 50);
    let base = run(&mut h, &ExperimentSpec::new("baseline", &["en"], &["xx"]))?;
    let mut spec = ExperimentSpec::new("name-match", &["en"], &["xx"]);
    spec.aux_pairs = Some("xx".into());
    let aux = run(&mut h, &spec)?;
    verdict(
        aux.pooled().f1 >= base.pooled().f1,
        format!(
            "zero-shot F1 with aux {:.3} [{}] >= without {:.3} [{}]",
            aux.pooled().f1,
            per_seed_f1(&aux),
            base.pooled().f1,
            per_seed_f1(&base)
        ),
    )
}

/// Half the ambiguous-name mentions use the bare family token, popularity is
/// steep, and the English training set keeps only its tail half.
pub fn popularity() -> Result<String, String> {
    let mut cfg = synth(&["en", "xx"]);
    cfg.ambiguity = 0.5;
    cfg.zipf_exponent = 1.5;
    cfg.anchor_noise = 0;
    let mut h = harness(cfg, 50);
    let mut micro = Vec::new();
    for (name, rerank) in [
        ("none", Rerank::None),
        ("train", Rerank::Popularity(PopularitySource::Train)),
        ("all", Rerank::Popularity(PopularitySource::All)),
    ] {
        let mut spec = ExperimentSpec::new(name, &["en"], &["xx"]);
        spec.reduction = Reduction::Tail(0.5);
        spec.rerank = rerank;
        micro.push(run(&mut h, &spec)?.pooled().micro_avg);
    }
    let (none, train, all) = (micro[0], micro[1], micro[2]);
    verdict(
        all >= train && train >= none,
        format!("micro all-data {all:.3} >= train-only {train:.3} >= none {none:.3}"),
    )
}

pub fn coverage() -> Result<String, String> {
    let mut h = harness(synth(&["en", "xx"]), 50);
    let both = ["en", "xx"];
    let mut rows = vec![("multi", run(&mut h, &ExperimentSpec::new("multi", &both, &both))?.pooled().f1)];
    for (name, reduction) in [("N-19", Reduction::Cap(19)), ("N-1", Reduction::Cap(1)), ("N-1U", Reduction::CapUnseen(1))] {
        let mut spec = ExperimentSpec::new(name, &["en"], &both);
        spec.reduction = reduction;
        rows.push((name, run(&mut h, &spec)?.pooled().f1));
    }
    let ordered = rows.windows(2).all(|w| w[0].1 >= w[1].1);
    let detail: Vec<String> = rows.iter().map(|(n, f)| format!("{n} {f:.3}")).collect();
    verdict(ordered, format!("F1 {}", detail.join(" >= ")))
}
