//! Topic modelling of title + abstract text and the cognitive distance built on it.

mod coherence;
mod knowledge;
mod lda;
mod tokenize;

use thiserror::Error;

pub use coherence::{coherence, select_best_k, select_k, Coherence, CoherenceConfig, KSelection};
pub use knowledge::{
    cognitive_distance, index_topic_vectors, knowledge_vector, CognitiveDistance, KnowledgeVector, TopicIndex,
};
pub use lda::{fit_lda, write_topic_vectors, LdaConfig, LdaFit, LdaModel, TopicVector};
pub use tokenize::{default_stoplist, tokenize, Analyzer, EnglishAnalyzer, TokenizedDoc};

#[derive(Debug, Error, PartialEq)]
pub enum TopicError {
    #[error("topic count must be at least 2, got {0}")]
    TooFewTopics(usize),
    #[error("vocabulary of {vocab} terms is smaller than {k} topics")]
    VocabTooSmall { vocab: usize, k: usize },
    #[error("all documents are empty")]
    AllDocsEmpty,
    #[error("{non_empty} non-empty documents cannot support {k} topics")]
    TooFewDocs { non_empty: usize, k: usize },
    #[error("top_m = {top_m} exceeds the vocabulary size {vocab}")]
    TopMExceedsVocab { top_m: usize, vocab: usize },
    #[error("vectors have different lengths ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("author `{0}` has no publication with a topic vector in the window")]
    NoWindowPublications(String),
    #[error("the topic-count grid is empty")]
    EmptyGrid,
}
