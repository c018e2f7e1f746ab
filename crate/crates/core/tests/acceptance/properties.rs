use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use xlel::datamodel::{Dataset, Entity, KnowledgeBase, Link, Mention};
use xlel::eval::{evaluate, EvalReport};
use xlel::inference::{predict, Prediction, RankedEntity};
use xlel::ranker::{batch_loss_grad, hinge_loss, score_pairs, InputDims, Mode, TrainingExample};
use xlel::triage::{
    allocate_slots, build_prior, candidates, expand_kb, triage_recall, Anchor, Candidate, CandidateSet,
    TriageConfig,
};

use crate::gradients::{random_bundle, random_mask, random_params, random_sizes};

const FORWARD_CHECKS: usize = 10_000;
const METRIC_SETS: usize = 1_000;

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

/// Four properties in rotation, one check each.
pub fn loss_forward_properties() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6c6f_7373);
    let mut lowest: f64 = 0.0;
    let mut highest: f64 = 0.0;
    for i in 0..FORWARD_CHECKS {
        let sizes = random_sizes(&mut rng);
        let dim = rng.gen_range(1..=6);
        let (mt, et) = (rng.gen_range(0..=3), rng.gen_range(0..=3));
        let params = random_params(&mut rng, &sizes, InputDims::from_features(dim, mt, et));
        let mask = random_mask(&mut rng);
        match i % 4 {
            0 => {
                let m = random_bundle(&mut rng, dim, mt);
                let es: Vec<_> = (0..rng.gen_range(1..=8)).map(|_| random_bundle(&mut rng, dim, et)).collect();
                let pairs: Vec<_> = es.iter().map(|e| (&m, e)).collect();
                for s in score_pairs(&params, &pairs, mask).map_err(|e| e.to_string())? {
                    lowest = lowest.min(s);
                    highest = highest.max(s);
                    check(s > -1.0 && s < 1.0, || format!("check {i}: score {s} outside (-1, 1)"))?;
                }
            }
            1 => {
                let pos = rng.gen_range(-1.0..1.0);
                let negs: Vec<f64> = (0..rng.gen_range(1..=10)).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let margin = rng.gen_range(0.0..2.0);
                let hardest = negs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let expected = (margin - (pos - hardest)).max(0.0);
                let got = hinge_loss(pos, &negs, margin).map_err(|e| e.to_string())?;
                check(got == expected, || format!("check {i}: hinge {got} != {expected}"))?;
            }
            2 => {
                let m = random_bundle(&mut rng, dim, mt);
                let pos = random_bundle(&mut rng, dim, et);
                let mut negs: Vec<_> = (0..rng.gen_range(1..=6)).map(|_| random_bundle(&mut rng, dim, et)).collect();
                let margin = rng.gen_range(0.1..2.0);
                let loss = |negs: &[xlel::encoder::RepresentationBundle]| {
                    let ex = [TrainingExample {
                        mention: &m,
                        positive: &pos,
                        negatives: negs.iter().collect(),
                    }];
                    batch_loss_grad(&params, &ex, margin, mask, Mode::Infer).map(|(l, _)| l)
                };
                let before = loss(&negs).map_err(|e| e.to_string())?;
                negs.shuffle(&mut rng);
                let after = loss(&negs).map_err(|e| e.to_string())?;
                check(before == after, || format!("check {i}: loss {before} != {after} after permuting negatives"))?;
            }
            _ => {
                let m = random_bundle(&mut rng, dim, mt);
                let e = random_bundle(&mut rng, dim, et);
                let (mut m2, mut e2) = (m.clone(), e.clone());
                let fresh_m = random_bundle(&mut rng, dim, mt);
                let fresh_e = random_bundle(&mut rng, dim, et);
                if !mask.use_name {
                    (m2.name, e2.name) = (fresh_m.name.clone(), fresh_e.name.clone());
                }
                if !mask.use_context {
                    (m2.context, e2.context) = (fresh_m.context.clone(), fresh_e.context.clone());
                }
                if !mask.use_type {
                    (m2.types, e2.types) = (fresh_m.types.clone(), fresh_e.types.clone());
                }
                let a = score_pairs(&params, &[(&m, &e)], mask).map_err(|e| e.to_string())?[0];
                let b = score_pairs(&params, &[(&m2, &e2)], mask).map_err(|e| e.to_string())?[0];
                check(a == b, || format!("check {i}: masked inputs changed the score ({a} vs {b}, mask {mask})"))?;
            }
        }
    }
    Ok(format!("{FORWARD_CHECKS} checks, observed scores in [{lowest:.3}, {highest:.3}]"))
}

#[derive(Debug, PartialEq)]
struct Brute {
    precision: f64,
    recall: f64,
    f1: f64,
    micro: f64,
}

/// Direct counting over the pairs, written independently of `EvalCounts`.
fn brute_force(pairs: &[(Link, Link)]) -> Brute {
    let gold_links = pairs.iter().filter(|(g, _)| !g.is_nil()).count();
    let pred_links = pairs.iter().filter(|(_, p)| !p.is_nil()).count();
    let correct = pairs.iter().filter(|(g, p)| !g.is_nil() && g == p).count();
    let agree = pairs.iter().filter(|(g, p)| g == p).count();
    let precision = if pred_links > 0 {
        correct as f64 / pred_links as f64
    } else if gold_links == 0 {
        1.0
    } else {
        0.0
    };
    let recall = if gold_links > 0 {
        correct as f64 / gold_links as f64
    } else if pred_links == 0 {
        1.0
    } else {
        0.0
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let micro = if pairs.is_empty() {
        1.0
    } else {
        agree as f64 / pairs.len() as f64
    };
    Brute {
        precision,
        recall,
        f1,
        micro,
    }
}

fn random_link(rng: &mut ChaCha8Rng, nil_rate: f64) -> Link {
    if rng.gen_bool(nil_rate) {
        Link::Nil
    } else {
        Link::entity(format!("E{}", rng.gen_range(0..4)))
    }
}

fn kb_of(n: usize) -> KnowledgeBase {
    let entities = (0..n).map(|i| Entity {
        id: format!("E{i}"),
        name: format!("Entity {i}"),
        description: String::new(),
        types: Vec::new(),
        wiki_title: None,
        in_kb: true,
    });
    KnowledgeBase::new("kb", entities).unwrap()
}

fn mention(id: String, surface: &str, gold: Link) -> Mention {
    Mention {
        id,
        doc_id: "d0".into(),
        language: "en".into(),
        surface: surface.into(),
        sentence: surface.into(),
        context_window: Vec::new(),
        mention_type: "PER".into(),
        gold,
    }
}

pub fn metric_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d65_7472);
    let kb = kb_of(4);
    let mut edge_cases = 0;
    for i in 0..METRIC_SETS {
        let n = match i % 10 {
            0 => 0,
            _ => rng.gen_range(1..30),
        };
        // Rotate through regimes that hit the zero-denominator branches.
        let (gold_nil, pred_nil) = match i % 5 {
            0 => (1.0, 1.0),
            1 => (1.0, rng.gen_range(0.0..1.0)),
            2 => (rng.gen_range(0.0..1.0), 1.0),
            _ => (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)),
        };
        let pairs: Vec<(Link, Link)> =
            (0..n).map(|_| (random_link(&mut rng, gold_nil), random_link(&mut rng, pred_nil))).collect();
        let mentions: Vec<Mention> =
            pairs.iter().enumerate().map(|(j, (g, _))| mention(format!("m{j}"), "x", g.clone())).collect();
        let ds = Dataset::new(mentions, "kb", Some(&kb)).map_err(|e| e.to_string())?;
        let mut preds: Vec<Prediction> = pairs
            .iter()
            .enumerate()
            .map(|(j, (_, p))| {
                let ranked = p
                    .entity_id()
                    .map(|id| {
                        vec![RankedEntity {
                            entity_id: id.to_string(),
                            score: 0.5,
                        }]
                    })
                    .unwrap_or_default();
                predict(&format!("m{j}"), ranked, -1.0)
            })
            .collect();
        // Order of predictions must not matter.
        preds.shuffle(&mut rng);
        let r: EvalReport = evaluate(&preds, &ds).map_err(|e| e.to_string())?;
        let got = Brute {
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            micro: r.micro_avg,
        };
        let want = brute_force(&pairs);
        if got != want {
            return Err(format!("set {i} ({n} mentions): evaluate gave {got:?}, oracle {want:?}"));
        }
        if r.counts.n_gold_links == 0 || r.counts.n_pred_links == 0 {
            edge_cases += 1;
        }
    }
    Ok(format!("{METRIC_SETS} sets equal the oracle exactly, {edge_cases} with a zero denominator"))
}

fn titled_kb<S: AsRef<str>>(specs: &[(S, S, Option<S>)]) -> KnowledgeBase {
    let entities = specs.iter().map(|(id, name, title)| Entity {
        id: id.as_ref().to_string(),
        name: name.as_ref().to_string(),
        description: String::new(),
        types: Vec::new(),
        wiki_title: title.as_ref().map(|t| t.as_ref().to_string()),
        in_kb: true,
    });
    KnowledgeBase::new("kb", entities).unwrap()
}

fn cand_set(items: &[(&str, f64)]) -> CandidateSet {
    CandidateSet {
        mention_id: "m".into(),
        candidates: items
            .iter()
            .map(|(id, p)| Candidate {
                entity_id: id.to_string(),
                prior: *p,
            })
            .collect(),
    }
}

fn fallback_chain() -> Result<(), String> {
    let kb = titled_kb(&[
        ("E1", "Paris", Some("Paris")),
        ("E2", "Paris Hilton", Some("Paris_Hilton")),
        ("E3", "Paris Texas", None),
        ("E4", "Springfield", None),
        ("E5", "Springfield", None),
    ]);
    let cfg = TriageConfig {
        k: 10,
        l: 6,
        normalize: true,
        two_step: true,
    };
    let m = |surface: &str| mention("m".into(), surface, Link::Nil);
    let ids = |c: &CandidateSet| c.ids().map(str::to_string).collect::<Vec<_>>();

    // Title index first.
    let out = expand_kb(&cand_set(&[("Paris", 0.75), ("Paris_Hilton", 0.25)]), &kb, &m("paris"), &cfg);
    check(ids(&out) == ["E1", "E2"], || format!("title lookup gave {:?}", ids(&out)))?;
    check(out.candidates[0].prior == 0.75 && out.candidates[1].prior == 0.25, || {
        "entities must inherit their title's prior".into()
    })?;
    // Name index on the title when the title index misses.
    let out = expand_kb(&cand_set(&[("Paris_Texas", 1.0)]), &kb, &m("pt"), &cfg);
    check(ids(&out) == ["E3"], || format!("name lookup on title gave {:?}", ids(&out)))?;
    // Mention surface only when every title came back empty.
    let out = expand_kb(&cand_set(&[("Nowhere", 0.6), ("Nothing", 0.4)]), &kb, &m("Springfield"), &cfg);
    check(ids(&out) == ["E4", "E5"], || format!("surface fallback gave {:?}", ids(&out)))?;
    let out = expand_kb(&cand_set(&[("Nowhere", 0.6), ("Paris", 0.4)]), &kb, &m("Springfield"), &cfg);
    check(ids(&out) == ["E1"], || format!("surface fallback must not fire when a title hits, got {:?}", ids(&out)))?;
    // Empty in, empty out, even when the surface would match.
    let out = expand_kb(&cand_set(&[]), &kb, &m("Springfield"), &cfg);
    check(out.is_empty(), || "empty candidate set must stay empty".into())?;
    // Duplicates keep the higher prior.
    let out = expand_kb(&cand_set(&[("Paris", 0.3), ("paris", 0.7)]), &kb, &m("x"), &cfg);
    check(out.len() == 1 && out.candidates[0].prior == 0.7, || format!("dedupe gave {:?}", out.candidates))?;
    let slots = allocate_slots(&[0.75, 0.25], 200);
    check(slots == [150, 50], || format!("slot budget {slots:?}"))?;
    Ok(())
}

pub fn triage_properties() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7472_6961);
    let mut rows = 0;
    let mut worst_sum: f64 = 0.0;
    for draw in 0..200 {
        let n_surfaces = rng.gen_range(1..6);
        let n_entities = rng.gen_range(1..12);
        let anchors: Vec<Anchor> = (0..rng.gen_range(1..40))
            .map(|_| Anchor {
                surface: format!("{}S{}", if rng.gen() { "  " } else { "" }, rng.gen_range(0..n_surfaces)),
                target: format!("E{}", rng.gen_range(0..n_entities)),
                count: rng.gen_range(0..50),
            })
            .collect();
        let prior = build_prior(&anchors, true);
        for (surface, row) in prior.rows() {
            rows += 1;
            let total: f64 = row.iter().map(|(_, p)| p).sum();
            worst_sum = worst_sum.max((total - 1.0).abs());
            check((total - 1.0).abs() <= 1e-9, || format!("draw {draw}: row {surface} sums to {total}"))?;
            check(row.iter().all(|(_, p)| *p > 0.0), || format!("draw {draw}: zero probability in {surface}"))?;
            // Brute-force renormalization of the raw counts.
            let mut raw: BTreeMap<&str, u64> = BTreeMap::new();
            for a in anchors.iter().filter(|a| a.surface.trim().to_lowercase() == surface) {
                *raw.entry(a.target.as_str()).or_insert(0) += a.count;
            }
            let z: u64 = raw.values().sum();
            for (id, p) in row {
                let want = raw[id.as_str()] as f64 / z as f64;
                check((p - want).abs() < 1e-12, || format!("draw {draw}: P({id}|{surface}) = {p}, want {want}"))?;
            }
            let k = rng.gen_range(1..5);
            let cfg = TriageConfig {
                k,
                l: k + rng.gen_range(0..20),
                ..TriageConfig::default()
            };
            let c = candidates(&mention("m".into(), surface, Link::Nil), &prior, &cfg);
            let prefix: Vec<&str> = row.iter().take(k).map(|(id, _)| id.as_str()).collect();
            check(c.ids().collect::<Vec<_>>() == prefix, || format!("draw {draw}: candidates not a prefix"))?;
        }

        let weights: Vec<f64> = (0..rng.gen_range(1..12)).map(|_| rng.gen_range(0.0..1.0)).collect();
        let l = rng.gen_range(1..300);
        let slots = allocate_slots(&weights, l);
        check(slots.iter().sum::<usize>() == l, || format!("draw {draw}: budgets {slots:?} do not sum to {l}"))?;
        let mass: f64 = weights.iter().sum();
        for (w, s) in weights.iter().zip(&slots) {
            let quota = w / mass * l as f64;
            check((*s as f64 - quota).abs() < 1.0, || format!("draw {draw}: slot {s} far from quota {quota}"))?;
        }

        // Random titled KB: expansion must be duplicate-free, bounded by l, sorted.
        let kb = titled_kb(
            &(0..n_entities)
                .map(|i| (format!("E{i}"), format!("N{}", i % 3), (i % 2 == 0).then(|| format!("T{i}"))))
                .collect::<Vec<_>>(),
        );
        let titles: Vec<(String, f64)> = (0..rng.gen_range(1..5))
            .map(|_| {
                let t = match rng.gen_range(0..3) {
                    0 => format!("T{}", rng.gen_range(0..n_entities)),
                    1 => format!("N{}", rng.gen_range(0..4)),
                    _ => "missing".to_string(),
                };
                (t, rng.gen_range(0.01..1.0))
            })
            .collect();
        let refs: Vec<(&str, f64)> = titles.iter().map(|(t, p)| (t.as_str(), *p)).collect();
        let cfg = TriageConfig {
            k: 1,
            l: rng.gen_range(1..8),
            normalize: true,
            two_step: true,
        };
        let out = expand_kb(&cand_set(&refs), &kb, &mention("m".into(), "N1", Link::Nil), &cfg);
        let mut seen: Vec<&str> = out.ids().collect();
        check(out.len() <= cfg.l, || format!("draw {draw}: {} candidates above l = {}", out.len(), cfg.l))?;
        seen.sort();
        seen.dedup();
        check(seen.len() == out.len(), || format!("draw {draw}: duplicate entity in {:?}", out.candidates))?;
        check(
            out.candidates.windows(2).all(|w| {
                w[0].prior > w[1].prior || (w[0].prior == w[1].prior && w[0].entity_id < w[1].entity_id)
            }),
            || format!("draw {draw}: expansion not sorted: {:?}", out.candidates),
        )?;

        // Recall against brute-force membership.
        let kb4 = kb_of(4);
        let mentions: Vec<Mention> =
            (0..rng.gen_range(0..10)).map(|j| mention(format!("m{j}"), "x", random_link(&mut rng, 0.3))).collect();
        let ds = Dataset::new(mentions, "kb", Some(&kb4)).map_err(|e| e.to_string())?;
        let sets: Vec<CandidateSet> = ds
            .mentions
            .iter()
            .map(|m| CandidateSet {
                mention_id: m.id.clone(),
                candidates: (0..4)
                    .filter(|_| rng.gen_bool(0.5))
                    .map(|e| Candidate {
                        entity_id: format!("E{e}"),
                        prior: 0.25,
                    })
                    .collect(),
            })
            .collect();
        let linked: Vec<(&Mention, &CandidateSet)> =
            ds.mentions.iter().zip(&sets).filter(|(m, _)| !m.gold.is_nil()).collect();
        let hits = linked.iter().filter(|(m, c)| c.ids().any(|id| Some(id) == m.gold.entity_id())).count();
        let want = if linked.is_empty() { 1.0 } else { hits as f64 / linked.len() as f64 };
        let got = triage_recall(&sets, &ds);
        check(got == want, || format!("draw {draw}: recall {got}, brute force {want}"))?;
    }
    fallback_chain()?;
    Ok(format!(
        "200 draws, {rows} prior rows (max |sum - 1| = {worst_sum:.1e}), budgets exact, fallback chain verified"
    ))
}
