//! Per-pair observation rows, descriptive statistics and the correlation screen.

mod describe;
mod screen;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use describe::{describe, quantile, write_describe_csv, Description, Summary};
pub use screen::{correlation_screen, CorrelationScreen, DEFAULT_THRESHOLD};

use crate::corpus::{Corpus, ScenarioId};
use crate::geo::{
    contiguity_binary, haversine_km, institutional_binaries, AdjacencyTable, EarthModel, GeoError, GeoPoint,
    RegionTags, Resolver,
};
use crate::network::{candidate_pairs, outcome_label, tenb, CoPubGraph, NetworkError, SamplingPolicy, WindowPair};
use crate::topics::{cognitive_distance, knowledge_vector, TopicError, TopicIndex};
use crate::util::{derive_seed, fmt_f64};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("window {window}: no {what}")]
    MissingArtifact { window: usize, what: &'static str },
    #[error("dataset has no rows")]
    Empty,
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("feature `{0}` is not part of this dataset's schema")]
    NotInSchema(Feature),
    #[error("geocoding: {0}")]
    Geo(#[from] GeoError),
    #[error("topics: {0}")]
    Topic(#[from] TopicError),
    #[error("dataset csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Model columns in declaration order. The correlation screen drops the
/// later of two collinear features, so the order matters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    LnGeo,
    LnTenb,
    Interaction,
    CogDistance,
    DifferentProvince,
    DifferentCountry,
    NotContiguous,
    DifferentContinent,
}

impl Feature {
    pub const ALL: [Feature; 8] = [
        Feature::LnGeo,
        Feature::LnTenb,
        Feature::Interaction,
        Feature::CogDistance,
        Feature::DifferentProvince,
        Feature::DifferentCountry,
        Feature::NotContiguous,
        Feature::DifferentContinent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::LnGeo => "ln_geo",
            Feature::LnTenb => "ln_tenb",
            Feature::Interaction => "interaction",
            Feature::CogDistance => "cog_distance",
            Feature::DifferentProvince => "different_province",
            Feature::DifferentCountry => "different_country",
            Feature::NotContiguous => "not_contiguous",
            Feature::DifferentContinent => "different_continent",
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(
            self,
            Feature::DifferentProvince
                | Feature::DifferentCountry
                | Feature::NotContiguous
                | Feature::DifferentContinent
        )
    }

    /// Columns present for a scenario.
    pub fn schema(scenario: ScenarioId) -> Vec<Feature> {
        use Feature::*;
        match scenario {
            ScenarioId::Canada => vec![
                LnGeo,
                LnTenb,
                Interaction,
                CogDistance,
                DifferentProvince,
                NotContiguous,
            ],
            ScenarioId::NorthAmerica => vec![
                LnGeo,
                LnTenb,
                Interaction,
                CogDistance,
                DifferentProvince,
                DifferentCountry,
                NotContiguous,
            ],
            ScenarioId::NorthAmericaEurope | ScenarioId::World => vec![
                LnGeo,
                LnTenb,
                Interaction,
                CogDistance,
                DifferentCountry,
                NotContiguous,
                DifferentContinent,
            ],
        }
    }

    /// Columns fed to the models by default: the schema without `different_continent`.
    pub fn default_model_features(scenario: ScenarioId, keep_continent: bool) -> Vec<Feature> {
        Self::schema(scenario)
            .into_iter()
            .filter(|f| keep_continent || *f != Feature::DifferentContinent)
            .collect()
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown feature `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairObservation {
    pub i: String,
    pub j: String,
    pub window_id: usize,
    pub co_publication: bool,
    pub geo_distance_km: f64,
    pub ln_geo: f64,
    pub tenb: f64,
    pub ln_tenb: f64,
    pub interaction: f64,
    pub cog_distance: f64,
    /// Set when a knowledge vector had zero variance.
    pub cog_degenerate: bool,
    pub different_province: Option<bool>,
    pub different_country: Option<bool>,
    pub not_contiguous: bool,
    pub different_continent: Option<bool>,
}

impl PairObservation {
    /// Builds a row from raw distance and TENB, deriving the log columns.
    #[allow(clippy::too_many_arguments)]
    pub fn from_raw(
        i: &str,
        j: &str,
        window_id: usize,
        co_publication: bool,
        geo_distance_km: f64,
        tenb: f64,
        cog_distance: f64,
        binaries: Binaries,
    ) -> Self {
        let ln_geo = geo_distance_km.ln_1p();
        let ln_tenb = tenb.ln_1p();
        PairObservation {
            i: i.to_string(),
            j: j.to_string(),
            window_id,
            co_publication,
            geo_distance_km,
            ln_geo,
            tenb,
            ln_tenb,
            interaction: ln_geo * ln_tenb,
            cog_distance,
            cog_degenerate: false,
            different_province: binaries.different_province,
            different_country: binaries.different_country,
            not_contiguous: binaries.not_contiguous,
            different_continent: binaries.different_continent,
        }
    }

    pub fn value(&self, feature: Feature) -> Option<f64> {
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        match feature {
            Feature::LnGeo => Some(self.ln_geo),
            Feature::LnTenb => Some(self.ln_tenb),
            Feature::Interaction => Some(self.interaction),
            Feature::CogDistance => Some(self.cog_distance),
            Feature::DifferentProvince => self.different_province.map(b),
            Feature::DifferentCountry => self.different_country.map(b),
            Feature::NotContiguous => Some(b(self.not_contiguous)),
            Feature::DifferentContinent => self.different_continent.map(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Binaries {
    pub different_province: Option<bool>,
    pub different_country: Option<bool>,
    pub not_contiguous: bool,
    pub different_continent: Option<bool>,
}

/// Why a candidate pair produced no row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairExclusion {
    NoAffiliation,
    UnresolvedGeocode,
    MissingKnowledgeVector,
    MissingProvince,
    UnknownRegion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowReport {
    pub window: WindowPair,
    pub candidates: usize,
    pub rows: usize,
    pub positives: usize,
    pub negatives_available: u64,
    pub applied_sampling: SamplingPolicy,
    pub excluded: BTreeMap<PairExclusion, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub scenario: ScenarioId,
    pub windows: Vec<WindowPair>,
    pub sampling: SamplingPolicy,
    pub seed: u64,
    pub earth_radius_km: f64,
    pub reports: Vec<WindowReport>,
    /// Windows with no author active in both halves.
    pub skipped_windows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scenario: ScenarioId,
    pub rows: Vec<PairObservation>,
    pub manifest: DatasetManifest,
}

/// Read-only inputs shared by every window.
pub struct FeatureSources<'a> {
    pub corpus: &'a Corpus,
    pub scenario: ScenarioId,
    pub resolver: &'a Resolver,
    pub adjacency: &'a AdjacencyTable,
    pub earth: EarthModel,
    pub topics: &'a TopicIndex,
}

struct AuthorInfo {
    point: GeoPoint,
    tags: RegionTags,
    knowledge: Vec<f64>,
}

fn author_info(
    src: &FeatureSources,
    key: &str,
    window: &WindowPair,
) -> Result<Result<AuthorInfo, PairExclusion>, FeatureError> {
    let Some(aff) = src.corpus.affiliation_in_span(key, window.feature) else {
        return Ok(Err(PairExclusion::NoAffiliation));
    };
    let point = match src.resolver.resolve(aff) {
        Ok(p) => p,
        Err(GeoError::Unresolved(_)) | Err(GeoError::Client { .. }) => {
            return Ok(Err(PairExclusion::UnresolvedGeocode))
        }
        Err(e) => return Err(e.into()),
    };
    let knowledge = match knowledge_vector(key, window.feature, src.corpus, src.topics) {
        Ok(kv) => kv.s,
        Err(TopicError::NoWindowPublications(_)) => return Ok(Err(PairExclusion::MissingKnowledgeVector)),
        Err(e) => return Err(e.into()),
    };
    Ok(Ok(AuthorInfo {
        point,
        tags: RegionTags::of(aff),
        knowledge,
    }))
}

fn pair_row(
    src: &FeatureSources,
    graph: &CoPubGraph,
    pair: &crate::network::CandidatePair,
    a: &AuthorInfo,
    b: &AuthorInfo,
) -> Result<Result<PairObservation, PairExclusion>, FeatureError> {
    let inst = match institutional_binaries(&a.tags, &b.tags, src.scenario) {
        Ok(f) => f,
        Err(GeoError::MissingProvince(_)) => return Ok(Err(PairExclusion::MissingProvince)),
        Err(e) => return Err(e.into()),
    };
    let not_contiguous = match contiguity_binary(&a.tags, &b.tags, src.adjacency) {
        Ok(x) => x,
        Err(GeoError::UnknownRegion(_)) => return Ok(Err(PairExclusion::UnknownRegion)),
        Err(e) => return Err(e.into()),
    };
    let different_continent = match src.scenario {
        ScenarioId::NorthAmericaEurope | ScenarioId::World => Some(a.tags.continent != b.tags.continent),
        _ => None,
    };
    let cog = cognitive_distance(&a.knowledge, &b.knowledge)?;
    let mut row = PairObservation::from_raw(
        &pair.i,
        &pair.j,
        pair.window.id,
        outcome_label(src.corpus, pair),
        haversine_km(a.point, b.point, src.earth),
        tenb(graph, &pair.i, &pair.j),
        cog.value,
        Binaries {
            different_province: inst.different_province,
            different_country: inst.different_country,
            not_contiguous,
            different_continent,
        },
    );
    row.cog_degenerate = cog.degenerate;
    Ok(Ok(row))
}

/// Builds one row per kept candidate pair across all windows.
///
/// `graphs` holds the feature-window co-publication graph for each window id.
/// Pairs whose features cannot be computed are dropped and counted per reason.
pub fn assemble(
    src: &FeatureSources,
    windows: &[WindowPair],
    graphs: &BTreeMap<usize, CoPubGraph>,
    sampling: SamplingPolicy,
    seed: u64,
) -> Result<Dataset, FeatureError> {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for window in windows {
        let graph = graphs.get(&window.id).ok_or(FeatureError::MissingArtifact {
            window: window.id,
            what: "co-publication graph",
        })?;
        let set = match candidate_pairs(src.corpus, *window, sampling, derive_seed(seed, 0xFEA7)) {
            Ok(s) => s,
            Err(NetworkError::NoEligibleAuthors { .. }) => {
                skipped.push(window.id);
                continue;
            }
            Err(e) => unreachable!("candidate_pairs only reports missing authors: {e}"),
        };
        let mut authors: Vec<&str> = set.pairs.iter().flat_map(|p| [p.i.as_str(), p.j.as_str()]).collect();
        authors.sort_unstable();
        authors.dedup();
        let infos: HashMap<&str, Result<AuthorInfo, PairExclusion>> = authors
            .par_iter()
            .map(|&k| author_info(src, k, window).map(|r| (k, r)))
            .collect::<Result<_, _>>()?;
        let results: Vec<Result<PairObservation, PairExclusion>> = set
            .pairs
            .par_iter()
            .map(|p| match (&infos[p.i.as_str()], &infos[p.j.as_str()]) {
                (Err(e), _) | (_, Err(e)) => Ok(Err(*e)),
                (Ok(a), Ok(b)) => pair_row(src, graph, p, a, b),
            })
            .collect::<Result<_, _>>()?;
        let mut excluded = BTreeMap::new();
        let before = rows.len();
        for r in results {
            match r {
                Ok(row) => rows.push(row),
                Err(e) => *excluded.entry(e).or_insert(0) += 1,
            }
        }
        reports.push(WindowReport {
            window: *window,
            candidates: set.pairs.len(),
            rows: rows.len() - before,
            positives: set.positives,
            negatives_available: set.negatives_available,
            applied_sampling: set.applied,
            excluded,
        });
    }
    Ok(Dataset {
        scenario: src.scenario,
        rows,
        manifest: DatasetManifest {
            scenario: src.scenario,
            windows: windows.to_vec(),
            sampling,
            seed,
            earth_radius_km: src.earth.radius_km,
            reports,
            skipped_windows: skipped,
        },
    })
}

const BASE_COLUMNS: [&str; 11] = [
    "window_id",
    "i",
    "j",
    "co_publication",
    "geo_distance_km",
    "ln_geo",
    "tenb",
    "ln_tenb",
    "interaction",
    "cog_distance",
    "cog_degenerate",
];

fn bit(x: bool) -> &'static str {
    if x {
        "1"
    } else {
        "0"
    }
}

impl Dataset {
    pub fn schema(&self) -> Vec<Feature> {
        Feature::schema(self.scenario)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.co_publication).collect()
    }

    pub fn column(&self, feature: Feature) -> Result<Vec<f64>, FeatureError> {
        if !self.schema().contains(&feature) {
            return Err(FeatureError::NotInSchema(feature));
        }
        Ok(self.rows.iter().map(|r| r.value(feature).unwrap_or(f64::NAN)).collect())
    }

    /// Row-major values of `features`.
    pub fn matrix(&self, features: &[Feature]) -> Result<Vec<Vec<f64>>, FeatureError> {
        let schema = self.schema();
        if let Some(f) = features.iter().find(|f| !schema.contains(f)) {
            return Err(FeatureError::NotInSchema(*f));
        }
        Ok(self
            .rows
            .iter()
            .map(|r| features.iter().map(|&f| r.value(f).unwrap_or(f64::NAN)).collect())
            .collect())
    }

    /// Fixed header per scenario, floats with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), FeatureError> {
        let binaries: Vec<Feature> = self.schema().into_iter().filter(|f| f.is_binary()).collect();
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
        header.extend(binaries.iter().map(|f| f.name()));
        out.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![
                r.window_id.to_string(),
                r.i.clone(),
                r.j.clone(),
                bit(r.co_publication).to_string(),
                fmt_f64(r.geo_distance_km),
                fmt_f64(r.ln_geo),
                fmt_f64(r.tenb),
                fmt_f64(r.ln_tenb),
                fmt_f64(r.interaction),
                fmt_f64(r.cog_distance),
                bit(r.cog_degenerate).to_string(),
            ];
            for f in &binaries {
                rec.push(if r.value(*f) == Some(1.0) { "1" } else { "0" }.to_string());
            }
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn manifest_json(&self) -> String {
        serde_json::to_string_pretty(&self.manifest).expect("manifest serializes")
    }

    /// Reads a dataset written by [`Dataset::write_csv`] with its manifest.
    pub fn read_csv<R: Read>(reader: R, manifest: DatasetManifest) -> Result<Self, FeatureError> {
        let scenario = manifest.scenario;
        let binaries: Vec<Feature> = Feature::schema(scenario)
            .into_iter()
            .filter(|f| f.is_binary())
            .collect();
        let mut rdr = csv::Reader::from_reader(reader);
        let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let mut expected: Vec<&str> = BASE_COLUMNS.to_vec();
        expected.extend(binaries.iter().map(|f| f.name()));
        if header != expected {
            return Err(FeatureError::Csv(format!(
                "header {header:?} does not match scenario {scenario}"
            )));
        }
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let bad = |col: &str| FeatureError::Csv(format!("row {}: bad `{col}`", line + 2));
            let num = |idx: usize| rec[idx].parse::<f64>().map_err(|_| bad(expected[idx]));
            let flag = |idx: usize| match &rec[idx] {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(bad(expected[idx])),
            };
            let mut obs = PairObservation {
                i: rec[1].to_string(),
                j: rec[2].to_string(),
                window_id: rec[0].parse().map_err(|_| bad("window_id"))?,
                co_publication: flag(3)?,
                geo_distance_km: num(4)?,
                ln_geo: num(5)?,
                tenb: num(6)?,
                ln_tenb: num(7)?,
                interaction: num(8)?,
                cog_distance: num(9)?,
                cog_degenerate: flag(10)?,
                different_province: None,
                different_country: None,
                not_contiguous: false,
                different_continent: None,
            };
            for (offset, f) in binaries.iter().enumerate() {
                let v = flag(BASE_COLUMNS.len() + offset)?;
                match f {
                    Feature::DifferentProvince => obs.different_province = Some(v),
                    Feature::DifferentCountry => obs.different_country = Some(v),
                    Feature::NotContiguous => obs.not_contiguous = v,
                    Feature::DifferentContinent => obs.different_continent = Some(v),
                    _ => unreachable!(),
                }
            }
            rows.push(obs);
        }
        Ok(Dataset {
            scenario,
            rows,
            manifest,
        })
    }
}

fn csv_err(e: csv::Error) -> FeatureError {
    FeatureError::Csv(e.to_string())
}
