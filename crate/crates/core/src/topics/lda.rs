use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{TokenizedDoc, TopicError};
use crate::util::{fmt_f64, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub k: usize,
    /// Symmetric document-topic prior; `None` means `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            k: 9,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            seed: 0,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

/// Fitted topic-term distributions. Rows of `topic_term` sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vocab: Vec<String>,
    pub topic_term: Vec<Vec<f64>>,
    pub seed: u64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicVector {
    pub pub_id: String,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaFit {
    pub model: LdaModel,
    /// One vector per non-empty input document, in input order.
    pub topic_vectors: Vec<TopicVector>,
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Inverse-CDF draw from unnormalized weights.
fn draw<R: Rng>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    let mut u = rng.gen::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return k;
        }
    }
    weights.len() - 1
}

/// Collapsed Gibbs sampling; the estimate comes from the final sample.
pub fn fit_lda(docs: &[TokenizedDoc], config: &LdaConfig) -> Result<LdaFit, TopicError> {
    let k = config.k;
    if k < 2 {
        return Err(TopicError::TooFewTopics(k));
    }
    let non_empty: Vec<&TokenizedDoc> = docs.iter().filter(|d| !d.is_empty()).collect();
    if non_empty.is_empty() {
        return Err(TopicError::AllDocsEmpty);
    }
    if non_empty.len() < k {
        return Err(TopicError::TooFewDocs {
            non_empty: non_empty.len(),
            k,
        });
    }
    let vocab: Vec<String> = non_empty
        .iter()
        .flat_map(|d| d.tokens.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let v = vocab.len();
    if v < k {
        return Err(TopicError::VocabTooSmall { vocab: v, k });
    }
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let words: Vec<Vec<usize>> = non_empty
        .iter()
        .map(|d| d.tokens.iter().map(|t| index[t.as_str()]).collect())
        .collect();

    let alpha = config.alpha();
    let beta = config.beta;
    let vbeta = v as f64 * beta;
    let mut rng = stream_rng(config.seed, 0);

    let mut n_dk = vec![vec![0u32; k]; words.len()];
    let mut n_kw = vec![vec![0u32; v]; k];
    let mut n_k = vec![0u32; k];
    let mut z: Vec<Vec<usize>> = words
        .iter()
        .enumerate()
        .map(|(d, ws)| {
            ws.iter()
                .map(|&w| {
                    let t = rng.gen_range(0..k);
                    n_dk[d][t] += 1;
                    n_kw[t][w] += 1;
                    n_k[t] += 1;
                    t
                })
                .collect()
        })
        .collect();

    let mut p = vec![0.0; k];
    for _ in 0..config.iterations {
        for (d, ws) in words.iter().enumerate() {
            for (pos, &w) in ws.iter().enumerate() {
                let old = z[d][pos];
                n_dk[d][old] -= 1;
                n_kw[old][w] -= 1;
                n_k[old] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    let pt = (n_dk[d][t] as f64 + alpha) * (n_kw[t][w] as f64 + beta) / (n_k[t] as f64 + vbeta);
                    p[t] = pt;
                    total += pt;
                }
                let new = draw(&mut rng, &p, total);
                z[d][pos] = new;
                n_dk[d][new] += 1;
                n_kw[new][w] += 1;
                n_k[new] += 1;
            }
        }
    }

    let topic_term = (0..k)
        .map(|t| {
            normalized(
                (0..v)
                    .map(|w| (n_kw[t][w] as f64 + beta) / (n_k[t] as f64 + vbeta))
                    .collect(),
            )
        })
        .collect();
    let topic_vectors = non_empty
        .iter()
        .zip(&n_dk)
        .map(|(doc, counts)| {
            let len = doc.tokens.len() as f64;
            TopicVector {
                pub_id: doc.pub_id.clone(),
                weights: normalized(
                    counts
                        .iter()
                        .map(|&c| (c as f64 + alpha) / (len + k as f64 * alpha))
                        .collect(),
                ),
            }
        })
        .collect();
    Ok(LdaFit {
        model: LdaModel {
            k,
            alpha,
            beta,
            vocab,
            topic_term,
            seed: config.seed,
            iterations: config.iterations,
        },
        topic_vectors,
    })
}

impl LdaModel {
    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.vocab.binary_search_by(|w| w.as_str().cmp(term)).ok()
    }

    /// Indices of the `m` heaviest terms of `topic`, ties to the lower index.
    pub fn top_terms(&self, topic: usize, m: usize) -> Vec<usize> {
        let row = &self.topic_term[topic];
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        idx.truncate(m);
        idx
    }

    /// Topic proportions of an unseen document by Gibbs fold-in with the
    /// topic-term matrix held fixed. Unknown terms are skipped; a document
    /// with no known terms gets the uniform vector.
    pub fn infer(&self, tokens: &[String], iterations: usize, seed: u64) -> Vec<f64> {
        let words: Vec<usize> = tokens.iter().filter_map(|t| self.term_index(t)).collect();
        let k = self.k;
        if words.is_empty() {
            return vec![1.0 / k as f64; k];
        }
        let mut rng = stream_rng(seed, 1);
        let mut n_k = vec![0u32; k];
        let mut z: Vec<usize> = words
            .iter()
            .map(|_| {
                let t = rng.gen_range(0..k);
                n_k[t] += 1;
                t
            })
            .collect();
        let mut p = vec![0.0; k];
        for _ in 0..iterations {
            for (pos, &w) in words.iter().enumerate() {
                n_k[z[pos]] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    p[t] = (n_k[t] as f64 + self.alpha) * self.topic_term[t][w];
                    total += p[t];
                }
                z[pos] = draw(&mut rng, &p, total);
                n_k[z[pos]] += 1;
            }
        }
        let len = words.len() as f64;
        normalized(
            n_k.iter()
                .map(|&c| (c as f64 + self.alpha) / (len + k as f64 * self.alpha))
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

/// CSV `pub_id,w1..wK`.
pub fn write_topic_vectors<W: Write>(vectors: &[TopicVector], k: usize, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["pub_id".to_string()];
    header.extend((1..=k).map(|i| format!("w{i}")));
    out.write_record(&header)?;
    for tv in vectors {
        let mut row = vec![tv.pub_id.clone()];
        row.extend(tv.weights.iter().map(|&x| fmt_f64(x)));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

impl LdaFit {
    pub fn topic_vectors_csv(&self) -> String {
        let mut buf = Vec::new();
        write_topic_vectors(&self.topic_vectors, self.model.k, &mut buf).expect("in-memory csv");
        String::from_utf8(buf).expect("utf-8")
    }
}
