use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_lda, LdaConfig, LdaFit, LdaModel, TokenizedDoc, TopicError};
use crate::util::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoherenceConfig {
    pub top_m: usize,
    /// Sliding co-occurrence window, in tokens.
    pub window: usize,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig { top_m: 10, window: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub per_topic: Vec<f64>,
    pub mean: f64,
}

/// Boolean sliding-window document frequencies for a fixed set of terms.
struct WindowCounts {
    windows: u64,
    single: HashMap<usize, u64>,
    joint: HashMap<(usize, usize), u64>,
}

impl WindowCounts {
    fn collect(model: &LdaModel, docs: &[TokenizedDoc], terms: &[usize], window: usize) -> Self {
        let wanted: HashMap<&str, usize> = terms.iter().map(|&t| (model.vocab[t].as_str(), t)).collect();
        let mut counts = WindowCounts {
            windows: 0,
            single: HashMap::new(),
            joint: HashMap::new(),
        };
        let mut present = Vec::with_capacity(window);
        for doc in docs.iter().filter(|d| !d.is_empty()) {
            let ids: Vec<Option<usize>> = doc.tokens.iter().map(|t| wanted.get(t.as_str()).copied()).collect();
            let n_windows = ids.len().saturating_sub(window) + 1;
            for start in 0..n_windows {
                let end = (start + window).min(ids.len());
                present.clear();
                present.extend(ids[start..end].iter().flatten().copied());
                present.sort_unstable();
                present.dedup();
                counts.windows += 1;
                for (a, &x) in present.iter().enumerate() {
                    *counts.single.entry(x).or_default() += 1;
                    for &y in &present[a + 1..] {
                        *counts.joint.entry((x, y)).or_default() += 1;
                    }
                }
            }
        }
        counts
    }

    /// Normalized PMI; pairs that never share a window score -1.
    fn npmi(&self, a: usize, b: usize) -> f64 {
        let key = if a < b { (a, b) } else { (b, a) };
        let joint = self.joint.get(&key).copied().unwrap_or(0);
        if joint == 0 || self.windows == 0 {
            return -1.0;
        }
        let n = self.windows as f64;
        let p_ab = joint as f64 / n;
        if joint == self.windows {
            return 1.0;
        }
        let p_a = self.single[&a] as f64 / n;
        let p_b = self.single[&b] as f64 / n;
        ((p_ab / (p_a * p_b)).ln() / -p_ab.ln()).clamp(-1.0, 1.0)
    }
}

/// Mean pairwise NPMI of each topic's top terms.
pub fn coherence(model: &LdaModel, docs: &[TokenizedDoc], config: &CoherenceConfig) -> Result<Coherence, TopicError> {
    let m = config.top_m;
    if m > model.vocab.len() {
        return Err(TopicError::TopMExceedsVocab {
            top_m: m,
            vocab: model.vocab.len(),
        });
    }
    let tops: Vec<Vec<usize>> = (0..model.k).map(|t| model.top_terms(t, m)).collect();
    let mut all: Vec<usize> = tops.iter().flatten().copied().collect();
    all.sort_unstable();
    all.dedup();
    let counts = WindowCounts::collect(model, docs, &all, config.window.max(1));
    let per_topic: Vec<f64> = tops
        .iter()
        .map(|top| {
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for (a, &x) in top.iter().enumerate() {
                for &y in &top[a + 1..] {
                    sum += counts.npmi(x, y);
                    pairs += 1;
                }
            }
            if pairs == 0 {
                0.0
            } else {
                sum / pairs as f64
            }
        })
        .collect();
    let mean = per_topic.iter().sum::<f64>() / per_topic.len() as f64;
    Ok(Coherence { per_topic, mean })
}

/// Highest score wins; scores within 1e-12 of each other tie and the smaller K wins.
pub fn select_best_k(scores: &[(usize, f64)]) -> Option<usize> {
    let mut sorted = scores.to_vec();
    sorted.sort_by_key(|&(k, _)| k);
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in sorted {
        match best {
            Some((_, b)) if s <= b + 1e-12 => {}
            _ => best = Some((k, s)),
        }
    }
    best.map(|(k, _)| k)
}

#[derive(Debug, Clone)]
pub struct KSelection {
    pub chosen: usize,
    pub scores: BTreeMap<usize, Coherence>,
    pub fit: LdaFit,
}

/// Fits one model per grid entry (seed derived from `base.seed` and K) and
/// keeps the most coherent.
pub fn select_k(
    docs: &[TokenizedDoc],
    grid: &[usize],
    base: &LdaConfig,
    coherence_config: &CoherenceConfig,
) -> Result<KSelection, TopicError> {
    if grid.is_empty() {
        return Err(TopicError::EmptyGrid);
    }
    let mut ks = grid.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let results: Vec<(usize, LdaFit, Coherence)> = ks
        .par_iter()
        .map(|&k| {
            let cfg = LdaConfig {
                k,
                seed: derive_seed(base.seed, k as u64),
                ..*base
            };
            let fit = fit_lda(docs, &cfg)?;
            let score = coherence(&fit.model, docs, coherence_config)?;
            Ok((k, fit, score))
        })
        .collect::<Result<_, TopicError>>()?;
    let table: Vec<(usize, f64)> = results.iter().map(|(k, _, c)| (*k, c.mean)).collect();
    let chosen = select_best_k(&table).expect("non-empty grid");
    let mut scores = BTreeMap::new();
    let mut chosen_fit = None;
    for (k, fit, c) in results {
        scores.insert(k, c);
        if k == chosen {
            chosen_fit = Some(fit);
        }
    }
    Ok(KSelection {
        chosen,
        scores,
        fit: chosen_fit.expect("chosen K was fitted"),
    })
}
