use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NetworkError, WindowPair};
use crate::corpus::Corpus;
use crate::util::{derive_seed, stream_rng};

/// One author pair observed in one window pair, `i < j` by key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidatePair {
    pub i: String,
    pub j: String,
    pub window: WindowPair,
}

/// How negatives (pairs without an outcome-window co-publication) are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SamplingPolicy {
    All,
    /// At most `negatives_per_positive` negatives per positive, without replacement.
    Ratio {
        negatives_per_positive: u32,
    },
    /// `All` up to `max_all_authors` eligible authors, `Ratio` above.
    Auto {
        max_all_authors: usize,
        negatives_per_positive: u32,
    },
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy::Auto {
            max_all_authors: 50_000,
            negatives_per_positive: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// Sorted by `(i, j)`.
    pub pairs: Vec<CandidatePair>,
    pub eligible_authors: usize,
    pub positives: usize,
    pub negatives_available: u64,
    pub negatives_kept: usize,
    /// The concrete policy used after resolving `Auto`.
    pub applied: SamplingPolicy,
}

fn active_authors(corpus: &Corpus, span: crate::corpus::YearSpan) -> BTreeSet<&str> {
    corpus.in_span(span).flat_map(|r| r.author_keys()).collect()
}

pub fn candidate_pairs(
    corpus: &Corpus,
    window: WindowPair,
    sampling: SamplingPolicy,
    seed: u64,
) -> Result<CandidateSet, NetworkError> {
    let feature_active = active_authors(corpus, window.feature);
    let outcome_active = active_authors(corpus, window.outcome);
    let eligible: Vec<&str> = feature_active.intersection(&outcome_active).copied().collect();
    if eligible.is_empty() {
        return Err(NetworkError::NoEligibleAuthors {
            feature: window.feature,
            outcome: window.outcome,
        });
    }
    let position = |k: &str| eligible.binary_search(&k).ok();

    let mut positives: BTreeSet<(usize, usize)> = BTreeSet::new();
    for rec in corpus.in_span(window.outcome) {
        let idx: Vec<usize> = rec.author_keys().into_iter().filter_map(position).collect();
        for (a, &x) in idx.iter().enumerate() {
            for &y in &idx[a + 1..] {
                positives.insert((x, y));
            }
        }
    }

    let e = eligible.len() as u64;
    let total_pairs = e * e.saturating_sub(1) / 2;
    let negatives_available = total_pairs - positives.len() as u64;
    let applied = match sampling {
        SamplingPolicy::Auto {
            max_all_authors,
            negatives_per_positive,
        } if eligible.len() > max_all_authors => SamplingPolicy::Ratio { negatives_per_positive },
        SamplingPolicy::Auto { .. } => SamplingPolicy::All,
        other => other,
    };
    let wanted = match applied {
        SamplingPolicy::Ratio { negatives_per_positive } => {
            (positives.len() as u64 * negatives_per_positive as u64).min(negatives_available)
        }
        _ => negatives_available,
    };

    let mut chosen: BTreeSet<(usize, usize)> = positives.clone();
    let n = eligible.len();
    if wanted == negatives_available {
        for x in 0..n {
            for y in x + 1..n {
                chosen.insert((x, y));
            }
        }
    } else if wanted > 0 {
        let mut rng = stream_rng(derive_seed(seed, window.id as u64), 0);
        if total_pairs <= 4_000_000 {
            let negatives: Vec<(usize, usize)> = (0..n)
                .flat_map(|x| (x + 1..n).map(move |y| (x, y)))
                .filter(|p| !positives.contains(p))
                .collect();
            for k in index::sample(&mut rng, negatives.len(), wanted as usize).into_vec() {
                chosen.insert(negatives[k]);
            }
        } else {
            // sparse sampling when the pair universe is too large to list
            let target = positives.len() + wanted as usize;
            while chosen.len() < target {
                let x = rng.gen_range(0..n);
                let y = rng.gen_range(0..n);
                if x != y {
                    chosen.insert((x.min(y), x.max(y)));
                }
            }
        }
    }

    let pairs: Vec<CandidatePair> = chosen
        .into_iter()
        .map(|(x, y)| CandidatePair {
            i: eligible[x].to_string(),
            j: eligible[y].to_string(),
            window,
        })
        .collect();
    Ok(CandidateSet {
        negatives_kept: pairs.len() - positives.len(),
        pairs,
        eligible_authors: eligible.len(),
        positives: positives.len(),
        negatives_available,
        applied,
    })
}

/// Whether the pair shares at least one outcome-window publication.
pub fn outcome_label(corpus: &Corpus, pair: &CandidatePair) -> bool {
    corpus
        .publications_of(&pair.i)
        .any(|r| pair.window.outcome.contains(r.year) && r.lists(&pair.j))
}
