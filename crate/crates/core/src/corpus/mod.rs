//! Publication records: parsing, validation, author keys and scenario filters.
//!
//! Input is JSON-lines, one publication per line. Records that fail
//! validation are excluded and counted per reason; malformed lines and
//! duplicate ids are hard errors.

mod countries;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use countries::{Continent, CountryCode};

use crate::geo::GeoPoint;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record on line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate pub_id `{0}`")]
    DuplicateId(String),
    #[error("corpus has no valid records")]
    Empty,
    #[error("author mention has neither a source identifier nor a name")]
    AnonymousAuthor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocType {
    Article,
    Conference,
    Chapter,
    Book,
}

/// One of the four nested geographic restrictions of the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ScenarioId {
    /// Canada only.
    Canada,
    /// Canada and the United States.
    NorthAmerica,
    /// Canada, the United States and Europe.
    NorthAmericaEurope,
    /// Everything.
    World,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [
        ScenarioId::Canada,
        ScenarioId::NorthAmerica,
        ScenarioId::NorthAmericaEurope,
        ScenarioId::World,
    ];

    pub fn number(self) -> u8 {
        self.into()
    }

    /// Whether an author whose canonical affiliation is in `country` fits this scenario.
    pub fn admits(self, country: CountryCode) -> bool {
        match self {
            ScenarioId::Canada => country.as_str() == "CA",
            ScenarioId::NorthAmerica => matches!(country.as_str(), "CA" | "US"),
            ScenarioId::NorthAmericaEurope => {
                matches!(country.as_str(), "CA" | "US") || country.continent() == Continent::Europe
            }
            ScenarioId::World => true,
        }
    }
}

impl TryFrom<u8> for ScenarioId {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(ScenarioId::Canada),
            2 => Ok(ScenarioId::NorthAmerica),
            3 => Ok(ScenarioId::NorthAmericaEurope),
            4 => Ok(ScenarioId::World),
            other => Err(format!("scenario must be 1, 2, 3 or 4, got {other}")),
        }
    }
}

impl From<ScenarioId> for u8 {
    fn from(s: ScenarioId) -> u8 {
        match s {
            ScenarioId::Canada => 1,
            ScenarioId::NorthAmerica => 2,
            ScenarioId::NorthAmericaEurope => 3,
            ScenarioId::World => 4,
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Explicit coordinates carried by an input record, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl Coordinates {
    pub fn to_point(self) -> GeoPoint {
        GeoPoint::from_degrees(self.lat_deg, self.lon_deg).expect("validated on load")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Affiliation {
    pub institution: String,
    pub city: String,
    pub province: Option<String>,
    pub country: CountryCode,
    pub continent: Continent,
    pub coordinates: Option<Coordinates>,
}

impl Affiliation {
    /// Lowercased, whitespace-collapsed address used as the geocoding key.
    pub fn address_key(&self) -> String {
        let parts = [
            self.institution.as_str(),
            self.city.as_str(),
            self.province.as_deref().unwrap_or(""),
            self.country.as_str(),
        ];
        parts.iter().map(|p| normalize(p)).collect::<Vec<_>>().join(", ")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthorMention {
    pub author_key: String,
    pub display_name: String,
    /// Never empty; the first entry is the canonical affiliation.
    pub affiliations: Vec<Affiliation>,
}

impl AuthorMention {
    pub fn canonical_affiliation(&self) -> &Affiliation {
        &self.affiliations[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PublicationRecord {
    pub pub_id: String,
    pub year: i32,
    pub title: String,
    pub abstract_text: String,
    pub keywords: Vec<String>,
    pub doc_type: DocType,
    pub authors: Vec<AuthorMention>,
}

impl PublicationRecord {
    /// Distinct author keys of this record, in key order.
    pub fn author_keys(&self) -> BTreeSet<&str> {
        self.authors.iter().map(|a| a.author_key.as_str()).collect()
    }

    pub fn lists(&self, key: &str) -> bool {
        self.authors.iter().any(|a| a.author_key == key)
    }

    pub fn mention(&self, key: &str) -> Option<&AuthorMention> {
        self.authors.iter().find(|a| a.author_key == key)
    }
}

/// Inclusive calendar-year span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearSpan {
    pub start: i32,
    pub end: i32,
}

impl YearSpan {
    pub fn new(start: i32, end: i32) -> Self {
        assert!(start <= end, "inverted year span {start}..{end}");
        YearSpan { start, end }
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }

    pub fn len(&self) -> i32 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &YearSpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl fmt::Display for YearSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

/// Immutable, indexed collection of validated records, ordered by `pub_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    records: Vec<PublicationRecord>,
    authors: BTreeMap<String, BTreeSet<usize>>,
    year_index: BTreeMap<i32, Vec<usize>>,
}

impl Corpus {
    pub fn from_records(mut records: Vec<PublicationRecord>) -> Result<Self, CorpusError> {
        records.sort_by(|a, b| a.pub_id.cmp(&b.pub_id));
        if let Some(w) = records.windows(2).find(|w| w[0].pub_id == w[1].pub_id) {
            return Err(CorpusError::DuplicateId(w[0].pub_id.clone()));
        }
        let mut authors: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        let mut year_index: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        for (idx, rec) in records.iter().enumerate() {
            for key in rec.author_keys() {
                authors.entry(key.to_string()).or_default().insert(idx);
            }
            year_index.entry(rec.year).or_default().push(idx);
        }
        Ok(Corpus {
            records,
            authors,
            year_index,
        })
    }

    pub fn records(&self) -> &[PublicationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, pub_id: &str) -> Option<&PublicationRecord> {
        self.records
            .binary_search_by(|r| r.pub_id.as_str().cmp(pub_id))
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn author_keys(&self) -> impl Iterator<Item = &str> {
        self.authors.keys().map(String::as_str)
    }

    /// Publication ids listing `key`, in id order.
    pub fn pub_ids_of(&self, key: &str) -> Vec<&str> {
        self.publications_of(key).map(|r| r.pub_id.as_str()).collect()
    }

    pub fn publications_of<'a>(&'a self, key: &str) -> impl Iterator<Item = &'a PublicationRecord> + 'a {
        self.authors
            .get(key)
            .into_iter()
            .flat_map(move |set| set.iter().map(move |&i| &self.records[i]))
    }

    pub fn pub_ids_in_year(&self, year: i32) -> Vec<&str> {
        self.year_index
            .get(&year)
            .map(|v| v.iter().map(|&i| self.records[i].pub_id.as_str()).collect())
            .unwrap_or_default()
    }

    /// Records whose year falls inside `span`, in (year, pub_id) order.
    pub fn in_span(&self, span: YearSpan) -> impl Iterator<Item = &PublicationRecord> {
        self.year_index
            .range(span.start..=span.end)
            .flat_map(move |(_, idx)| idx.iter().map(move |&i| &self.records[i]))
    }

    pub fn year_range(&self) -> Option<YearSpan> {
        let first = *self.year_index.keys().next()?;
        let last = *self.year_index.keys().next_back()?;
        Some(YearSpan::new(first, last))
    }

    /// The affiliation an author is located at for a window: the canonical
    /// affiliation on their most recent publication in the span, ties broken
    /// by the smallest pub_id.
    pub fn affiliation_in_span(&self, key: &str, span: YearSpan) -> Option<&Affiliation> {
        self.publications_of(key)
            .filter(|r| span.contains(r.year))
            .max_by(|a, b| a.year.cmp(&b.year).then_with(|| b.pub_id.cmp(&a.pub_id)))
            .and_then(|r| r.mention(key))
            .map(AuthorMention::canonical_affiliation)
    }

    pub fn write_canonical<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for rec in &self.records {
            let raw = RawRecord::from(rec);
            serde_json::to_writer(&mut w, &raw)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_canonical_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_canonical(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8 json")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyPolicy {
    /// Upstream identifier when present, name plus first institution otherwise.
    #[default]
    SourceId,
    /// Always name plus first institution.
    NameAffiliation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub first_year: i32,
    pub last_year: i32,
    pub key_policy: KeyPolicy,
    /// Keep only records whose title, abstract or keywords contain one of these phrases.
    pub phrase_filter: Option<Vec<String>>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            first_year: 2000,
            last_year: 2019,
            key_policy: KeyPolicy::SourceId,
            phrase_filter: None,
        }
    }
}

impl CorpusConfig {
    pub fn ai_phrases() -> Vec<String> {
        ["artificial intelligence", "machine learning", "deep learning"]
            .into_iter()
            .map(String::from)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    MissingTitle,
    MissingAbstract,
    YearOutOfRange,
    NoAuthors,
    NoAffiliation,
    MissingCountry,
    InvalidCoordinates,
    AnonymousAuthor,
    PhraseFilter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub line: usize,
    pub pub_id: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub counts: BTreeMap<ExclusionReason, usize>,
    pub details: Vec<Exclusion>,
}

impl ExclusionReport {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn count(&self, reason: ExclusionReason) -> usize {
        self.counts.get(&reason).copied().unwrap_or(0)
    }

    fn push(&mut self, line: usize, pub_id: &str, reason: ExclusionReason) {
        *self.counts.entry(reason).or_default() += 1;
        self.details.push(Exclusion {
            line,
            pub_id: pub_id.to_string(),
            reason,
        });
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub exclusions: ExclusionReport,
    pub lines_read: usize,
}

// Wire schema.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub pub_id: String,
    pub year: i32,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default, rename = "abstract")]
    pub abstract_text: Option<String>,
    #[serde(default)]
    pub keywords: Vec<String>,
    pub doc_type: DocType,
    #[serde(default)]
    pub authors: Vec<RawAuthor>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAuthor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_key: Option<String>,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub affiliations: Vec<RawAffiliation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAffiliation {
    #[serde(default)]
    pub institution: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub city: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub province: Option<String>,
    #[serde(default)]
    pub country: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
}

impl From<&PublicationRecord> for RawRecord {
    fn from(rec: &PublicationRecord) -> Self {
        RawRecord {
            pub_id: rec.pub_id.clone(),
            year: rec.year,
            title: Some(rec.title.clone()),
            abstract_text: Some(rec.abstract_text.clone()),
            keywords: rec.keywords.clone(),
            doc_type: rec.doc_type,
            authors: rec
                .authors
                .iter()
                .map(|a| RawAuthor {
                    author_key: Some(a.author_key.clone()),
                    name: a.display_name.clone(),
                    affiliations: a
                        .affiliations
                        .iter()
                        .map(|af| RawAffiliation {
                            institution: af.institution.clone(),
                            city: (!af.city.is_empty()).then(|| af.city.clone()),
                            province: af.province.clone(),
                            country: af.country.to_string(),
                            lat: af.coordinates.map(|c| c.lat_deg),
                            lon: af.coordinates.map(|c| c.lon_deg),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Lowercase and collapse internal whitespace.
pub fn normalize(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Deterministic identity key for an author mention.
pub fn author_key_of(mention: &RawAuthor, policy: KeyPolicy) -> Result<String, CorpusError> {
    let source = mention.author_key.as_deref().map(str::trim).filter(|s| !s.is_empty());
    if policy == KeyPolicy::SourceId {
        if let Some(id) = source {
            return Ok(id.to_string());
        }
    }
    let name = normalize(&mention.name);
    if name.is_empty() {
        return match source {
            // name-affiliation policy without a name still has an id to fall back on
            Some(id) => Ok(id.to_string()),
            None => Err(CorpusError::AnonymousAuthor),
        };
    }
    let institution = mention
        .affiliations
        .first()
        .map(|a| normalize(&a.institution))
        .unwrap_or_default();
    Ok(format!("{name}|{institution}"))
}

fn validate(raw: RawRecord, config: &CorpusConfig) -> Result<PublicationRecord, ExclusionReason> {
    use ExclusionReason::*;
    let title = raw.title.unwrap_or_default();
    let abstract_text = raw.abstract_text.unwrap_or_default();
    if title.trim().is_empty() {
        return Err(MissingTitle);
    }
    if abstract_text.trim().is_empty() {
        return Err(MissingAbstract);
    }
    if raw.year < config.first_year || raw.year > config.last_year {
        return Err(YearOutOfRange);
    }
    if raw.authors.is_empty() {
        return Err(NoAuthors);
    }
    if let Some(phrases) = &config.phrase_filter {
        let haystack = normalize(&format!("{title} {abstract_text} {}", raw.keywords.join(" ")));
        if !phrases.iter().any(|p| haystack.contains(&normalize(p))) {
            return Err(PhraseFilter);
        }
    }
    let mut authors = Vec::with_capacity(raw.authors.len());
    for ra in &raw.authors {
        if ra.affiliations.is_empty() {
            return Err(NoAffiliation);
        }
        let key = author_key_of(ra, config.key_policy).map_err(|_| AnonymousAuthor)?;
        let mut affiliations = Vec::with_capacity(ra.affiliations.len());
        for af in &ra.affiliations {
            let country = CountryCode::parse(&af.country).ok_or(MissingCountry)?;
            let coordinates = match (af.lat, af.lon) {
                (Some(lat), Some(lon)) => {
                    GeoPoint::from_degrees(lat, lon).ok_or(InvalidCoordinates)?;
                    Some(Coordinates {
                        lat_deg: lat,
                        lon_deg: lon,
                    })
                }
                (None, None) => None,
                _ => return Err(InvalidCoordinates),
            };
            affiliations.push(Affiliation {
                institution: af.institution.trim().to_string(),
                city: af.city.as_deref().unwrap_or("").trim().to_string(),
                province: af
                    .province
                    .as_deref()
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(String::from),
                country,
                continent: country.continent(),
                coordinates,
            });
        }
        authors.push(AuthorMention {
            author_key: key,
            display_name: ra.name.trim().to_string(),
            affiliations,
        });
    }
    Ok(PublicationRecord {
        pub_id: raw.pub_id,
        year: raw.year,
        title,
        abstract_text,
        keywords: raw.keywords,
        doc_type: raw.doc_type,
        authors,
    })
}

pub fn load_corpus(path: &Path, config: &CorpusConfig) -> Result<LoadedCorpus, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(BufReader::new(file), config).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

pub fn parse_corpus<R: BufRead>(reader: R, config: &CorpusConfig) -> Result<LoadedCorpus, CorpusError> {
    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    let mut exclusions = ExclusionReport::default();
    let mut lines_read = 0;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: String::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        lines_read += 1;
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(raw.pub_id.clone()) {
            return Err(CorpusError::DuplicateId(raw.pub_id));
        }
        let pub_id = raw.pub_id.clone();
        match validate(raw, config) {
            Ok(rec) => records.push(rec),
            Err(reason) => exclusions.push(line_no, &pub_id, reason),
        }
    }
    if records.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(LoadedCorpus {
        corpus: Corpus::from_records(records)?,
        exclusions,
        lines_read,
    })
}

/// Keeps publications all of whose authors' canonical affiliations fall in the scenario.
pub fn scenario_filter(corpus: &Corpus, scenario: ScenarioId) -> Result<Corpus, CorpusError> {
    if scenario == ScenarioId::World {
        return Ok(corpus.clone());
    }
    let kept: Vec<_> = corpus
        .records()
        .iter()
        .filter(|r| {
            r.authors
                .iter()
                .all(|a| scenario.admits(a.canonical_affiliation().country))
        })
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(CorpusError::Empty);
    }
    Corpus::from_records(kept)
}
