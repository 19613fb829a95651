//! Seeded generators for test data: pair-feature tables and a small bibliographic corpus.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Exp};
use serde::{Deserialize, Serialize};

use crate::corpus::{DocType, RawAffiliation, RawAuthor, RawRecord};
use crate::features::Feature;
use crate::ml::Matrix;
use crate::util::stream_rng;

/// Column order of the seven-feature tables.
pub const PAIR_FEATURES: [Feature; 7] = [
    Feature::LnGeo,
    Feature::LnTenb,
    Feature::Interaction,
    Feature::CogDistance,
    Feature::DifferentProvince,
    Feature::DifferentCountry,
    Feature::NotContiguous,
];

pub fn pair_feature_names() -> Vec<String> {
    PAIR_FEATURES.iter().map(|f| f.name().to_string()).collect()
}

/// One draw of pair features shaped like real candidate pairs: log-uniform
/// distances, mostly-zero TENB, binaries that switch on with distance.
fn pair_row(rng: &mut ChaCha8Rng) -> [f64; 7] {
    let ln_geo = rng.gen_range(0.0..8.5);
    let d = f64::exp_m1(ln_geo);
    let tenb: f64 = if rng.gen_bool(0.55) {
        0.0
    } else {
        0.8 * rng.sample(Exp::new(1.0).unwrap())
    };
    let ln_tenb = tenb.ln_1p();
    let cog = rng.gen_range(0.0..2.0);
    let province = d > 250.0 || (d > 30.0 && rng.gen_bool(0.3));
    let country = d > 800.0 && rng.gen_bool(0.4);
    let contiguous = province && (d > 1200.0 || rng.gen_bool(0.3));
    let b = |x: bool| f64::from(u8::from(x));
    [
        ln_geo,
        ln_tenb,
        ln_geo * ln_tenb,
        cog,
        b(province),
        b(country),
        b(contiguous),
    ]
}

/// Linear score used by the separable set.
fn separable_score(r: &[f64; 7]) -> f64 {
    -0.4 * r[0] + 4.0 * r[1] + 0.4 * r[2] - 2.5 * r[3]
}

/// `n` rows labelled by the sign of a linear score, with rows inside a
/// margin of 0.5 around the threshold rejected, so the classes are linearly
/// separable. About a third of the rows are positive.
pub fn separable_pairs(n: usize, seed: u64) -> (Matrix, Vec<bool>) {
    let mut rng = stream_rng(seed, 0x5E9A);
    let mut x = Matrix::new(7);
    let mut y = Vec::with_capacity(n);
    while y.len() < n {
        let r = pair_row(&mut rng);
        let s = separable_score(&r) + 2.0;
        if s.abs() < 0.5 {
            continue;
        }
        x.push_row(&r);
        y.push(s > 0.0);
    }
    (x, y)
}

/// Bernoulli labels whose log-odds move mostly with cognitive distance.
pub fn cognitive_dominated_pairs(n: usize, seed: u64) -> (Matrix, Vec<bool>) {
    let mut rng = stream_rng(seed, 0xC06);
    let mut x = Matrix::new(7);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let r = pair_row(&mut rng);
        let eta = -0.5 - 0.1 * (r[0] - 4.25) + 0.6 * r[1] - 5.0 * (r[3] - 1.0);
        y.push(rng.gen::<f64>() < 1.0 / (1.0 + (-eta).exp()));
        x.push_row(&r);
    }
    (x, y)
}

/// Columns of [`logit_sample`] rows.
pub const LOGIT_FEATURES: [Feature; 4] = [
    Feature::LnGeo,
    Feature::LnTenb,
    Feature::Interaction,
    Feature::CogDistance,
];

/// Bernoulli draws from a logit with coefficients `beta` (intercept, ln_geo,
/// ln_tenb, interaction, cog_distance) over pair-shaped features.
pub fn logit_sample(beta: &[f64; 5], n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = stream_rng(seed, 0x1061);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let r = pair_row(&mut rng);
        let row = vec![r[0], r[1], r[2], r[3] * 0.6];
        let eta = beta[0] + row.iter().zip(&beta[1..]).map(|(x, b)| x * b).sum::<f64>();
        y.push(rng.gen::<f64>() < 1.0 / (1.0 + (-eta).exp()));
        rows.push(row);
    }
    (rows, y)
}

const TOPIC_WORDS: [&[&str]; 3] = [
    &[
        "image",
        "pixel",
        "camera",
        "convolution",
        "segmentation",
        "object",
        "detection",
        "scene",
        "video",
        "texture",
        "depth",
        "visual",
        "recognition",
        "face",
        "pose",
        "tracking",
        "optical",
        "stereo",
    ],
    &[
        "language",
        "sentence",
        "translation",
        "word",
        "parsing",
        "corpus",
        "dialogue",
        "speech",
        "grammar",
        "syntax",
        "semantic",
        "lexicon",
        "summarization",
        "question",
        "answer",
        "text",
        "token",
        "embedding",
    ],
    &[
        "robot",
        "control",
        "reward",
        "policy",
        "planning",
        "agent",
        "navigation",
        "manipulation",
        "grasp",
        "motion",
        "actuator",
        "trajectory",
        "locomotion",
        "sensor",
        "torque",
        "arm",
        "drone",
        "exploration",
    ],
];

const FILLER: &[&str] = &[
    "machine",
    "learning",
    "method",
    "approach",
    "model",
    "result",
    "propose",
    "novel",
    "evaluate",
    "performance",
];

/// (city, province, country) entries present in the bundled gazetteer.
const CA_CITIES: &[(&str, &str)] = &[
    ("Montreal", "QC"),
    ("Quebec City", "QC"),
    ("Sherbrooke", "QC"),
    ("Toronto", "ON"),
    ("Ottawa", "ON"),
    ("Waterloo", "ON"),
    ("Kingston", "ON"),
    ("Vancouver", "BC"),
    ("Victoria", "BC"),
    ("Edmonton", "AB"),
    ("Calgary", "AB"),
    ("Winnipeg", "MB"),
    ("Halifax", "NS"),
    ("Fredericton", "NB"),
];

const US_CITIES: &[(&str, &str)] = &[
    ("Boston", "MA"),
    ("New York", "NY"),
    ("Buffalo", "NY"),
    ("Pittsburgh", "PA"),
    ("Seattle", "WA"),
    ("Chicago", "IL"),
    ("Minneapolis", "MN"),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticCorpusConfig {
    pub authors: usize,
    pub first_year: i32,
    pub last_year: i32,
    pub pubs_per_year: usize,
    /// Fraction of authors based in the United States.
    pub us_share: f64,
    pub seed: u64,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        SyntheticCorpusConfig {
            authors: 100,
            first_year: 2010,
            last_year: 2019,
            pubs_per_year: 70,
            us_share: 0.15,
            seed: 2022,
        }
    }
}

struct SynthAuthor {
    key: String,
    city: usize,
    us: bool,
    topic: usize,
    active: (i32, i32),
}

/// A corpus in which co-authors tend to share a city, a topic and earlier
/// collaborators, so every proximity carries signal.
pub fn synthetic_corpus(config: &SyntheticCorpusConfig) -> Vec<RawRecord> {
    let mut rng = stream_rng(config.seed, 0xC0A9);
    let span = config.last_year - config.first_year;
    let authors: Vec<SynthAuthor> = (0..config.authors)
        .map(|i| {
            let us = rng.gen_bool(config.us_share);
            let cities = if us { US_CITIES.len() } else { CA_CITIES.len() };
            let start = config.first_year + rng.gen_range(0..=span / 3);
            let end = config.last_year - rng.gen_range(0..=span / 4);
            SynthAuthor {
                key: format!("A{i:04}"),
                city: rng.gen_range(0..cities),
                us,
                topic: rng.gen_range(0..TOPIC_WORDS.len()),
                active: (start, end),
            }
        })
        .collect();
    let mut coauthored: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let team_size = WeightedIndex::new([3.0, 5.0, 3.0, 1.0]).unwrap();
    let stay_on_topic = Bernoulli::new(0.8).unwrap();
    let mut records = Vec::new();
    for year in config.first_year..=config.last_year {
        let active: Vec<usize> = (0..authors.len())
            .filter(|&a| (authors[a].active.0..=authors[a].active.1).contains(&year))
            .collect();
        if active.len() < 4 {
            continue;
        }
        for p in 0..config.pubs_per_year {
            let lead = active[rng.gen_range(0..active.len())];
            let size = 1 + rng.sample(&team_size);
            let mut team = vec![lead];
            while team.len() < size {
                let weights: Vec<f64> = active
                    .iter()
                    .map(|&c| {
                        if team.contains(&c) {
                            return 0.0;
                        }
                        let (a, b) = (&authors[lead], &authors[c]);
                        let mut w = 1.0;
                        if a.us == b.us && a.city == b.city {
                            w *= 6.0;
                        }
                        if a.topic == b.topic {
                            w *= 4.0;
                        }
                        let known = coauthored.get(&lead);
                        if known.is_some_and(|k| k.contains(&c)) {
                            w *= 8.0;
                        } else if known
                            .is_some_and(|k| k.iter().any(|m| coauthored.get(m).is_some_and(|s| s.contains(&c))))
                        {
                            w *= 3.0;
                        }
                        w
                    })
                    .collect();
                let Ok(pick) = WeightedIndex::new(&weights) else { break };
                team.push(active[rng.sample(pick)]);
            }
            for &a in &team {
                for &b in &team {
                    if a != b {
                        coauthored.entry(a).or_default().insert(b);
                    }
                }
            }
            let text = |len: usize, rng: &mut ChaCha8Rng| -> String {
                (0..len)
                    .map(|_| {
                        if rng.gen_bool(0.15) {
                            FILLER[rng.gen_range(0..FILLER.len())]
                        } else {
                            let who = team[rng.gen_range(0..team.len())];
                            let topic = if rng.sample(stay_on_topic) {
                                authors[who].topic
                            } else {
                                rng.gen_range(0..TOPIC_WORDS.len())
                            };
                            let words = TOPIC_WORDS[topic];
                            words[rng.gen_range(0..words.len())]
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let title = text(rng.gen_range(4..8), &mut rng);
            let abstract_text = text(rng.gen_range(30..50), &mut rng);
            records.push(RawRecord {
                pub_id: format!("P{year}-{p:03}"),
                year,
                title: Some(title),
                abstract_text: Some(abstract_text),
                keywords: vec![],
                doc_type: if p % 3 == 0 {
                    DocType::Conference
                } else {
                    DocType::Article
                },
                authors: team
                    .iter()
                    .map(|&a| {
                        let au = &authors[a];
                        let (city, province) = if au.us { US_CITIES[au.city] } else { CA_CITIES[au.city] };
                        RawAuthor {
                            author_key: Some(au.key.clone()),
                            name: format!("Author {}", au.key),
                            affiliations: vec![RawAffiliation {
                                institution: format!("University of {city}"),
                                city: Some(city.to_string()),
                                province: Some(province.to_string()),
                                country: if au.us { "US" } else { "CA" }.to_string(),
                                lat: None,
                                lon: None,
                            }],
                        }
                    })
                    .collect(),
            });
        }
    }
    records
}

/// One JSON object per line.
pub fn to_jsonl(records: &[RawRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_corpus, scenario_filter, CorpusConfig, ScenarioId};

    #[test]
    fn separable_set_respects_margin() {
        let (x, y) = separable_pairs(2000, 1);
        assert_eq!(x.rows(), 2000);
        let share = y.iter().filter(|&&v| v).count() as f64 / 2000.0;
        assert!((0.15..0.5).contains(&share), "{share}");
        for (r, &label) in x.iter_rows().zip(&y) {
            let s = separable_score(&r.try_into().unwrap()) + 2.0;
            assert!(s.abs() >= 0.5 && (s > 0.0) == label);
        }
    }

    #[test]
    fn generators_are_seeded() {
        assert_eq!(cognitive_dominated_pairs(50, 3).1, cognitive_dominated_pairs(50, 3).1);
        assert_ne!(
            logit_sample(&[0.0, 0.0, 0.0, 0.0, 0.0], 200, 1).1,
            logit_sample(&[0.0; 5], 200, 2).1
        );
    }

    #[test]
    fn corpus_round_trips_through_the_loader() {
        let cfg = SyntheticCorpusConfig::default();
        let text = to_jsonl(&synthetic_corpus(&cfg));
        assert_eq!(text, to_jsonl(&synthetic_corpus(&cfg)));
        let loaded = parse_corpus(text.as_bytes(), &CorpusConfig::default()).unwrap();
        assert_eq!(loaded.exclusions.total(), 0);
        let canada = scenario_filter(&loaded.corpus, ScenarioId::Canada).unwrap();
        assert!(canada.len() < loaded.corpus.len() && canada.len() > loaded.corpus.len() / 2);
    }

    #[test]
    fn bundled_fixture_is_the_default_corpus() {
        let bundled = include_str!("../data/synthetic_corpus.jsonl");
        assert_eq!(bundled, to_jsonl(&synthetic_corpus(&SyntheticCorpusConfig::default())));
    }
}
