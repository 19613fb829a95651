use std::collections::HashSet;

use rust_stemmers::{Algorithm, Stemmer};

use crate::corpus::PublicationRecord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDoc {
    pub pub_id: String,
    pub tokens: Vec<String>,
}

impl TokenizedDoc {
    /// Documents that lost every token to the stoplist are kept but flagged here.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Turns free text into normalized terms.
pub trait Analyzer: Send + Sync {
    fn analyze(&self, text: &str) -> Vec<String>;
}

/// Lowercase, split on anything that is not alphanumeric, drop stopwords and
/// pure numbers, then apply the Snowball English stemmer.
pub struct EnglishAnalyzer {
    stoplist: HashSet<String>,
    stemmer: Option<Stemmer>,
}

impl EnglishAnalyzer {
    pub fn new(stoplist: HashSet<String>) -> Self {
        EnglishAnalyzer {
            stoplist,
            stemmer: Some(Stemmer::create(Algorithm::English)),
        }
    }

    pub fn without_stemming(stoplist: HashSet<String>) -> Self {
        EnglishAnalyzer {
            stoplist,
            stemmer: None,
        }
    }
}

impl Default for EnglishAnalyzer {
    fn default() -> Self {
        Self::new(default_stoplist())
    }
}

impl Analyzer for EnglishAnalyzer {
    fn analyze(&self, text: &str) -> Vec<String> {
        text.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .filter(|t| !t.chars().all(|c| c.is_numeric()))
            .filter(|t| !self.stoplist.contains(*t))
            .map(|t| match &self.stemmer {
                Some(s) => s.stem(t).into_owned(),
                None => t.to_string(),
            })
            .collect()
    }
}

pub fn default_stoplist() -> HashSet<String> {
    include_str!("../../data/stopwords_en.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

/// Tokens of the concatenated title and abstract.
pub fn tokenize(record: &PublicationRecord, analyzer: &dyn Analyzer) -> TokenizedDoc {
    let text = format!("{} {}", record.title, record.abstract_text);
    TokenizedDoc {
        pub_id: record.pub_id.clone(),
        tokens: analyzer.analyze(&text),
    }
}
