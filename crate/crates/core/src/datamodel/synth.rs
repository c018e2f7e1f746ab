//! Seeded generator for small multilingual linking corpora.
//!
//! Entities are pseudo-word names grouped into families that share a last
//! token, so the bare family token is an ambiguous alias. Every language has a
//! fixed character transliteration and an affix pair; mention surfaces are
//! drawn from a per-(entity, language) alias set built from noisy variants of
//! the transliterated name. Gold entities follow a Zipf law over a
//! language-specific popularity ranking. Anchor counts for the alias prior
//! are emitted alongside the mentions.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::types::{normalize_surface, Dataset, Entity, KnowledgeBase, Link, Mention};
use crate::error::{Error, Result};
use crate::triage::Anchor;

/// Language whose transliteration is the identity.
pub const PIVOT_LANGUAGE: &str = "en";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_entities: usize,
    /// Mentions per language.
    pub n_mentions: usize,
    pub languages: Vec<String>,
    pub nil_rate: f64,
    pub zipf_exponent: f64,
    pub name_noise: f64,
    pub context_informativeness: f64,
    pub seed: u64,
    /// Probability that a linked mention uses its entity's bare family token.
    pub ambiguity: f64,
    pub max_family_size: usize,
    /// Distinct full-name surface variants per (entity, language).
    pub alias_variants: usize,
    /// Random low-count anchor targets added to each full-name alias.
    pub anchor_noise: usize,
    /// Probability that a full-name alias also anchors each family sibling.
    pub family_confusion: f64,
    /// Fraction of popularity ranks swapped per language.
    pub language_skew: f64,
    pub mentions_per_doc: usize,
    pub description_keywords: usize,
    /// Transliteration name pairs emitted per language.
    pub n_pairs: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_entities: 200,
            n_mentions: 1000,
            languages: vec![PIVOT_LANGUAGE.to_string()],
            nil_rate: 0.2,
            zipf_exponent: 1.1,
            name_noise: 0.1,
            context_informativeness: 0.8,
            seed: 0,
            ambiguity: 0.1,
            max_family_size: 3,
            alias_variants: 3,
            anchor_noise: 3,
            family_confusion: 1.0,
            language_skew: 0.1,
            mentions_per_doc: 10,
            description_keywords: 6,
            n_pairs: 1000,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        unit("nil_rate", self.nil_rate)?;
        unit("name_noise", self.name_noise)?;
        unit("context_informativeness", self.context_informativeness)?;
        unit("ambiguity", self.ambiguity)?;
        unit("language_skew", self.language_skew)?;
        unit("family_confusion", self.family_confusion)?;
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "zipf_exponent must be finite and non-negative, got {}",
                self.zipf_exponent
            )));
        }
        if self.n_entities == 0 || self.languages.is_empty() {
            return Err(Error::InvalidArgument("need at least one entity and one language".into()));
        }
        if self.max_family_size == 0 || self.alias_variants == 0 || self.mentions_per_doc == 0 {
            return Err(Error::InvalidArgument(
                "max_family_size, alias_variants and mentions_per_doc must be positive".into(),
            ));
        }
        let distinct: BTreeSet<&String> = self.languages.iter().collect();
        if distinct.len() != self.languages.len() {
            return Err(Error::InvalidArgument("duplicate language tag".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub kb: KnowledgeBase,
    pub datasets: BTreeMap<String, Dataset>,
    /// Alias counts over all languages.
    pub anchors: Vec<Anchor>,
    /// (source-language name, English name) pairs per language.
    pub name_pairs: BTreeMap<String, Vec<(String, String)>>,
}

const TYPES: [(&str, &str); 4] = [
    ("PER", "people.person"),
    ("ORG", "organization.organization"),
    ("GPE", "location.country"),
    ("LOC", "location.location"),
];
const ONSETS: [&str; 20] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "sh", "tr", "br",
    "kr", "st",
];
const VOWELS: [&str; 7] = ["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: [&str; 8] = ["", "", "n", "r", "s", "l", "m", "k"];
const REPLACEMENTS: [&str; 20] = [
    "k", "w", "z", "x", "q", "j", "y", "á", "é", "í", "ó", "ú", "ñ", "ç", "ö", "ü", "ph", "kh",
    "sz", "ou",
];
const PREFIXES: [&str; 6] = ["al", "el", "o", "mak", "de", "san"];
const SUFFIXES: [&str; 6] = ["ov", "ski", "ez", "ani", "son", "ra"];

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn sub_rng(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(label.as_bytes()))
}

struct WordGen {
    used: HashSet<String>,
}

impl WordGen {
    fn fresh(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let syllables = rng.gen_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(rng).unwrap());
                w.push_str(VOWELS.choose(rng).unwrap());
                w.push_str(CODAS.choose(rng).unwrap());
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

fn capitalize(w: &str) -> String {
    let mut cs = w.chars();
    match cs.next() {
        Some(c) => c.to_uppercase().chain(cs).collect(),
        None => String::new(),
    }
}

/// Fixed per-language surface transform.
struct Language {
    tag: String,
    letter_map: BTreeMap<char, &'static str>,
    prefix: &'static str,
    suffix: &'static str,
}

impl Language {
    fn new(tag: &str) -> Self {
        let mut rng = sub_rng(0x5eed, &format!("language:{tag}"));
        let mut letter_map = BTreeMap::new();
        if tag != PIVOT_LANGUAGE {
            for c in 'a'..='z' {
                if rng.gen_bool(0.4) {
                    let r = *REPLACEMENTS.choose(&mut rng).unwrap();
                    if r != c.to_string() {
                        letter_map.insert(c, r);
                    }
                }
            }
        }
        Language {
            tag: tag.to_string(),
            letter_map,
            prefix: PREFIXES.choose(&mut rng).unwrap(),
            suffix: SUFFIXES.choose(&mut rng).unwrap(),
        }
    }

    fn transliterate_word(&self, word: &str) -> String {
        let mut out = String::new();
        for (i, c) in word.chars().enumerate() {
            let lower = c.to_lowercase().next().unwrap_or(c);
            let piece = self
                .letter_map
                .get(&lower)
                .map(|s| s.to_string())
                .unwrap_or_else(|| lower.to_string());
            if i == 0 && c.is_uppercase() {
                out.push_str(&capitalize(&piece));
            } else {
                out.push_str(&piece);
            }
        }
        out
    }

    fn transliterate(&self, text: &str) -> String {
        text.split(' ')
            .map(|w| self.transliterate_word(w))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Transliteration plus random letter substitutions and affix decoration.
    fn noisy(&self, text: &str, noise: f64, rng: &mut ChaCha8Rng) -> String {
        let base = self.transliterate(text);
        let mut out: String = base
            .chars()
            .map(|c| {
                if c.is_alphabetic() && rng.gen_bool(noise * 0.3) {
                    (b'a' + rng.gen_range(0..26u8)) as char
                } else {
                    c
                }
            })
            .collect();
        if rng.gen_bool(noise) {
            out = if rng.gen_bool(0.5) {
                format!("{} {out}", capitalize(self.prefix))
            } else {
                format!("{out} {}", capitalize(self.suffix))
            };
        }
        out
    }
}

struct EntitySeed {
    given: String,
    family_word: String,
    family: usize,
    ner: &'static str,
    keywords: Vec<String>,
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = sub_rng(cfg.seed, "entities");
    let mut words = WordGen {
        used: HashSet::new(),
    };

    let mut seeds: Vec<EntitySeed> = Vec::with_capacity(cfg.n_entities);
    let mut family = 0usize;
    while seeds.len() < cfg.n_entities {
        let size = rng.gen_range(1..=cfg.max_family_size).min(cfg.n_entities - seeds.len());
        let family_word = words.fresh(&mut rng);
        for _ in 0..size {
            let ner = TYPES.choose(&mut rng).unwrap().0;
            let keywords = (0..cfg.description_keywords)
                .map(|_| words.fresh(&mut rng))
                .collect();
            seeds.push(EntitySeed {
                given: words.fresh(&mut rng),
                family_word: family_word.clone(),
                family,
                ner,
                keywords,
            });
        }
        family += 1;
    }
    let filler: Vec<String> = (0..300).map(|_| words.fresh(&mut rng)).collect();

    let width = cfg.n_entities.to_string().len().max(5);
    let ids: Vec<String> = (0..cfg.n_entities).map(|i| format!("m.{i:0width$}")).collect();
    let entities: Vec<Entity> = seeds
        .iter()
        .zip(&ids)
        .map(|(s, id)| {
            let name = format!("{} {}", capitalize(&s.given), capitalize(&s.family_word));
            let kb_type = TYPES.iter().find(|t| t.0 == s.ner).unwrap().1;
            Entity {
                id: id.clone(),
                wiki_title: Some(name.replace(' ', "_")),
                name,
                description: s.keywords.join(" "),
                types: vec![kb_type.to_string(), "common.topic".to_string()],
                in_kb: true,
            }
        })
        .collect();
    let members: BTreeMap<usize, Vec<usize>> = seeds.iter().enumerate().fold(
        BTreeMap::new(),
        |mut acc, (i, s)| {
            acc.entry(s.family).or_insert_with(Vec::new).push(i);
            acc
        },
    );

    let base_rank: Vec<usize> = {
        let mut r: Vec<usize> = (0..cfg.n_entities).collect();
        r.shuffle(&mut rng);
        r
    };
    let zipf: Vec<f64> = (1..=cfg.n_entities)
        .map(|r| (r as f64).powf(-cfg.zipf_exponent))
        .collect();
    let zipf_total: f64 = zipf.iter().sum();

    struct LangState {
        lang: Language,
        weights: Vec<f64>,
        variants: Vec<Vec<String>>,
        family_alias: BTreeMap<usize, String>,
    }

    let mut anchors: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut all_aliases: HashSet<String> = HashSet::new();
    let mut states = Vec::new();
    for tag in &cfg.languages {
        let lang = Language::new(tag);
        let mut lrng = sub_rng(cfg.seed, &format!("aliases:{tag}"));
        let mut rank = base_rank.clone();
        let swaps = (cfg.language_skew * cfg.n_entities as f64).round() as usize;
        for _ in 0..swaps {
            let a = lrng.gen_range(0..cfg.n_entities);
            let b = lrng.gen_range(0..cfg.n_entities);
            rank.swap(a, b);
        }
        let mut weights = vec![0.0; cfg.n_entities];
        for (r, &e) in rank.iter().enumerate() {
            weights[e] = zipf[r] / zipf_total;
        }

        let mut variants = Vec::with_capacity(cfg.n_entities);
        for (e, ent) in entities.iter().enumerate() {
            let mut vs: Vec<String> = vec![lang.transliterate(&ent.name)];
            let mut seen: BTreeSet<String> = vs.iter().map(|v| normalize_surface(v)).collect();
            let mut attempts = 0;
            while vs.len() < cfg.alias_variants && attempts < 20 * cfg.alias_variants {
                attempts += 1;
                let v = lang.noisy(&ent.name, cfg.name_noise.max(0.05), &mut lrng);
                if seen.insert(normalize_surface(&v)) {
                    vs.push(v);
                }
            }
            let count = 2 + (weights[e] * 500.0).round() as u64;
            for v in &vs {
                *anchors.entry((v.clone(), ids[e].clone())).or_insert(0) += count;
                for &other in &members[&seeds[e].family] {
                    if other != e && lrng.gen_bool(cfg.family_confusion) {
                        *anchors.entry((v.clone(), ids[other].clone())).or_insert(0) += 1;
                    }
                }
                for _ in 0..cfg.anchor_noise {
                    let other = lrng.gen_range(0..cfg.n_entities);
                    if other != e {
                        *anchors.entry((v.clone(), ids[other].clone())).or_insert(0) += 1;
                    }
                }
                all_aliases.insert(normalize_surface(v));
            }
            variants.push(vs);
        }
        let mut family_alias = BTreeMap::new();
        for (&fam, idxs) in &members {
            let alias = lang.transliterate(&capitalize(&seeds[idxs[0]].family_word));
            for &e in idxs {
                let count = 1 + (weights[e] * 500.0).round() as u64;
                *anchors.entry((alias.clone(), ids[e].clone())).or_insert(0) += count;
            }
            all_aliases.insert(normalize_surface(&alias));
            family_alias.insert(fam, alias);
        }
        states.push(LangState {
            lang,
            weights,
            variants,
            family_alias,
        });
    }

    let mut datasets = BTreeMap::new();
    let mut name_pairs = BTreeMap::new();
    for st in &states {
        let tag = &st.lang.tag;
        let mut mrng = sub_rng(cfg.seed, &format!("mentions:{tag}"));
        let sampler = WeightedIndex::new(&st.weights)
            .map_err(|e| Error::InvalidArgument(format!("popularity weights: {e}")))?;
        let n_nil = (cfg.nil_rate * cfg.n_mentions as f64).round() as usize;
        let mut is_nil = vec![false; cfg.n_mentions];
        is_nil[..n_nil].iter_mut().for_each(|b| *b = true);
        is_nil.shuffle(&mut mrng);
        let lang_filler: Vec<String> = filler.iter().map(|w| st.lang.transliterate(w)).collect();
        let fill = |rng: &mut ChaCha8Rng, n: usize| -> Vec<String> {
            (0..n).map(|_| lang_filler.choose(rng).unwrap().clone()).collect()
        };

        let mut mentions = Vec::with_capacity(cfg.n_mentions);
        for (i, &nil) in is_nil.iter().enumerate() {
            let (surface, gold, ner, keywords) = if nil {
                let surface = loop {
                    let name = format!(
                        "{} {}",
                        capitalize(&words.fresh(&mut mrng)),
                        capitalize(&words.fresh(&mut mrng))
                    );
                    let s = st.lang.noisy(&name, cfg.name_noise, &mut mrng);
                    if !all_aliases.contains(&normalize_surface(&s)) {
                        break s;
                    }
                };
                (surface, Link::Nil, TYPES.choose(&mut mrng).unwrap().0, Vec::new())
            } else {
                let e = sampler.sample(&mut mrng);
                let surface = if mrng.gen_bool(cfg.ambiguity) {
                    st.family_alias[&seeds[e].family].clone()
                } else {
                    st.variants[e].choose(&mut mrng).unwrap().clone()
                };
                let keywords: Vec<String> = if mrng.gen_bool(cfg.context_informativeness) {
                    seeds[e]
                        .keywords
                        .choose_multiple(&mut mrng, 3.min(seeds[e].keywords.len()))
                        .map(|k| st.lang.transliterate(k))
                        .collect()
                } else {
                    Vec::new()
                };
                (surface, Link::Entity(ids[e].clone()), seeds[e].ner, keywords)
            };

            let mut words_before = fill(&mut mrng, 2);
            let words_after = fill(&mut mrng, 2);
            words_before.push(surface.clone());
            words_before.extend(words_after);
            let sentence = format!("{}.", capitalize(&words_before.join(" ")));
            let mut pre = fill(&mut mrng, 6);
            let mut post = fill(&mut mrng, 6);
            for (j, k) in keywords.into_iter().enumerate() {
                let target = if j % 2 == 0 { &mut pre } else { &mut post };
                let pos = mrng.gen_range(0..=target.len());
                target.insert(pos, k);
            }
            let context_window = vec![
                format!("{}.", capitalize(&pre.join(" "))),
                sentence.clone(),
                format!("{}.", capitalize(&post.join(" "))),
            ];
            mentions.push(Mention {
                id: format!("{tag}-{i:05}"),
                doc_id: format!("{tag}-d{:04}", i / cfg.mentions_per_doc),
                language: tag.clone(),
                surface,
                sentence,
                context_window,
                mention_type: ner.to_string(),
                gold,
            });
        }
        datasets.insert(tag.clone(), Dataset::from_trusted(mentions, "synthetic".into()));

        let mut prng = sub_rng(cfg.seed, &format!("pairs:{tag}"));
        let pairs: Vec<(String, String)> = (0..cfg.n_pairs)
            .map(|_| {
                let english = format!(
                    "{} {}",
                    capitalize(&words.fresh(&mut prng)),
                    capitalize(&words.fresh(&mut prng))
                );
                (st.lang.noisy(&english, cfg.name_noise, &mut prng), english)
            })
            .collect();
        name_pairs.insert(tag.clone(), pairs);
    }

    Ok(SynthCorpus {
        kb: KnowledgeBase::new("synthetic", entities)?,
        datasets,
        anchors: anchors
            .into_iter()
            .map(|((surface, target), count)| Anchor {
                surface,
                target,
                count,
            })
            .collect(),
        name_pairs,
    })
}
