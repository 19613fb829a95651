use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{TopicError, TopicVector};
use crate::corpus::{Corpus, YearSpan};
use crate::util::pearson;

/// Topic vectors keyed by pub_id.
pub type TopicIndex = BTreeMap<String, Vec<f64>>;

pub fn index_topic_vectors(vectors: &[TopicVector]) -> TopicIndex {
    vectors.iter().map(|t| (t.pub_id.clone(), t.weights.clone())).collect()
}

/// An author's mean topic vector over one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeVector {
    pub author_key: String,
    pub window: YearSpan,
    pub s: Vec<f64>,
}

pub fn knowledge_vector(
    author: &str,
    window: YearSpan,
    corpus: &Corpus,
    topics: &TopicIndex,
) -> Result<KnowledgeVector, TopicError> {
    let vectors: Vec<&Vec<f64>> = corpus
        .publications_of(author)
        .filter(|r| window.contains(r.year))
        .filter_map(|r| topics.get(&r.pub_id))
        .collect();
    let first = vectors
        .first()
        .ok_or_else(|| TopicError::NoWindowPublications(author.to_string()))?;
    let k = first.len();
    let mut s = vec![0.0; k];
    for v in &vectors {
        if v.len() != k {
            return Err(TopicError::DimensionMismatch(k, v.len()));
        }
        for (acc, x) in s.iter_mut().zip(v.iter()) {
            *acc += x;
        }
    }
    let n = vectors.len() as f64;
    s.iter_mut().for_each(|x| *x /= n);
    Ok(KnowledgeVector {
        author_key: author.to_string(),
        window,
        s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CognitiveDistance {
    /// `1 - corr(s_i, s_j)`, in [0, 2].
    pub value: f64,
    /// Set when one vector has zero variance and the value was fixed at 1.
    pub degenerate: bool,
}

pub fn cognitive_distance(si: &[f64], sj: &[f64]) -> Result<CognitiveDistance, TopicError> {
    if si.len() != sj.len() {
        return Err(TopicError::DimensionMismatch(si.len(), sj.len()));
    }
    Ok(match pearson(si, sj) {
        Some(r) => CognitiveDistance {
            value: (1.0 - r).clamp(0.0, 2.0),
            degenerate: false,
        },
        None => CognitiveDistance {
            value: 1.0,
            degenerate: true,
        },
    })
}
