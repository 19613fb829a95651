//! End-to-end orchestration: corpus in, report bundle out.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{load_corpus, scenario_filter, Corpus, CorpusConfig, ExclusionReport, ScenarioId};
use crate::explain::{beeswarm_export, beeswarm_svg, elasticity_svg, explain_model, sample_background, BeeswarmExport};
use crate::features::{assemble, correlation_screen, describe, Dataset, Feature, FeatureSources, DEFAULT_THRESHOLD};
use crate::geo::{AdjacencyTable, EarthModel, GeocodeCache, RegionLevel, Resolver};
use crate::logit::{
    default_distance_grid, elasticity_csv, fit_dataset, logit_table, tenb_elasticity_curve, ElasticityPoint,
    LogitConfig, LogitFit,
};
use crate::ml::{run_protocol, tuning_log_csv, ClassifierKind, Matrix, MlReport, SmoteConfig, SplitPlan, TunePlan};
use crate::network::{build_graph, make_windows, CoPubGraph, SamplingPolicy, WindowConfig, WindowPair};
use crate::topics::{
    index_topic_vectors, select_k, tokenize, CoherenceConfig, EnglishAnalyzer, KSelection, LdaConfig, TokenizedDoc,
};
use crate::util::{derive_seed, sha256_hex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Geocode,
    Windows,
    Topics,
    Features,
    Fit,
    Ml,
    Explain,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Geocode,
        Stage::Windows,
        Stage::Topics,
        Stage::Features,
        Stage::Fit,
        Stage::Ml,
        Stage::Explain,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Geocode => "geocode",
            Stage::Windows => "windows",
            Stage::Topics => "topics",
            Stage::Features => "features",
            Stage::Fit => "fit",
            Stage::Ml => "ml",
            Stage::Explain => "explain",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("{stage} stage failed: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

fn at<E: fmt::Display>(stage: Stage) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError {
        stage,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsConfig {
    pub k_grid: Vec<usize>,
    /// `None` means `50 / K`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub coherence: CoherenceConfig,
}

impl Default for TopicsConfig {
    fn default() -> Self {
        TopicsConfig {
            k_grid: (5..=15).collect(),
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            coherence: CoherenceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlConfig {
    pub kinds: Vec<ClassifierKind>,
    pub split: SplitPlan,
    pub tuning: TunePlan,
    /// `None` disables rebalancing.
    pub smote: Option<SmoteConfig>,
}

impl Default for MlConfig {
    fn default() -> Self {
        MlConfig {
            kinds: ClassifierKind::ALL.to_vec(),
            split: SplitPlan::default(),
            tuning: TunePlan::default(),
            smote: Some(SmoteConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Classifier whose test-set predictions are explained; `None` picks the best by test AUC.
    pub model: Option<ClassifierKind>,
    /// Leading test rows to explain.
    pub rows: usize,
    pub background: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            model: Some(ClassifierKind::GradientBoostedTrees),
            rows: 200,
            background: 256,
        }
    }
}

/// Everything a run depends on. Relative paths are taken as given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub scenario: ScenarioId,
    pub seed: u64,
    pub corpus_filter: CorpusConfig,
    /// JSONL geocode cache consulted before the bundled gazetteer.
    pub geocode_cache: Option<PathBuf>,
    pub earth: EarthModel,
    pub windows: WindowConfig,
    pub sampling: SamplingPolicy,
    pub topics: TopicsConfig,
    pub correlation_threshold: f64,
    /// Keep `different_continent` in the model columns.
    pub keep_continent: bool,
    pub logit: LogitConfig,
    pub ml: MlConfig,
    pub explain: ExplainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: PathBuf::new(),
            scenario: ScenarioId::Canada,
            seed: 0,
            corpus_filter: CorpusConfig::default(),
            geocode_cache: None,
            earth: EarthModel::default(),
            windows: WindowConfig::default(),
            sampling: SamplingPolicy::default(),
            topics: TopicsConfig::default(),
            correlation_threshold: DEFAULT_THRESHOLD,
            keep_continent: false,
            logit: LogitConfig::default(),
            ml: MlConfig::default(),
            explain: ExplainConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Settings sized for the bundled synthetic corpus.
    pub fn synthetic(corpus: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            corpus: corpus.into(),
            corpus_filter: CorpusConfig {
                first_year: 2010,
                last_year: 2019,
                ..Default::default()
            },
            sampling: SamplingPolicy::Ratio {
                negatives_per_positive: 4,
            },
            topics: TopicsConfig {
                k_grid: vec![2, 3, 4, 5],
                iterations: 200,
                ..Default::default()
            },
            ml: MlConfig {
                tuning: TunePlan {
                    random_fits: 2,
                    max_grid_fits: 1,
                    ..Default::default()
                },
                ..Default::default()
            },
            explain: ExplainConfig {
                rows: 80,
                background: 32,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn seeds(&self) -> StageSeeds {
        StageSeeds::from_master(self.seed)
    }
}

/// Per-stage seeds, all derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub master: u64,
    pub sampling: u64,
    pub topics: u64,
    pub split: u64,
    pub tuning: u64,
    pub background: u64,
}

impl StageSeeds {
    pub fn from_master(master: u64) -> Self {
        StageSeeds {
            master,
            sampling: derive_seed(master, 1),
            topics: derive_seed(master, 2),
            split: derive_seed(master, 3),
            tuning: derive_seed(master, 4),
            background: derive_seed(master, 5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChecksum {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: Stage,
    pub message: String,
}

/// Written as `manifest.json`; enough to rerun and compare every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub config: PipelineConfig,
    pub seeds: StageSeeds,
    pub inputs: Vec<FileChecksum>,
    pub completed_stages: Vec<Stage>,
    /// False when the run stopped early or failed; artifacts are then partial.
    pub complete: bool,
    pub failure: Option<Failure>,
    pub artifacts: Vec<FileChecksum>,
}

/// Files of a complete bundle, in write order.
pub const BUNDLE_FILES: [&str; 11] = [
    "dataset.csv",
    "describe.csv",
    "corr.csv",
    "logit_table.txt",
    "elasticity.csv",
    "ml_tuning.csv",
    "eval.json",
    "shap.csv",
    "beeswarm.svg",
    "elasticity.svg",
    "manifest.json",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeocodeSummary {
    pub affiliations: usize,
    pub resolved: usize,
    pub unresolved: Vec<String>,
}

/// In-memory results of the stages that ran.
#[derive(Default)]
pub struct RunArtifacts {
    pub exclusions: Option<ExclusionReport>,
    pub corpus: Option<Corpus>,
    pub geocode: Option<GeocodeSummary>,
    pub windows: Vec<WindowPair>,
    pub topics: Option<KSelection>,
    pub dataset: Option<Dataset>,
    pub model_features: Vec<Feature>,
    pub logit: Option<LogitFit>,
    pub elasticity: Vec<ElasticityPoint>,
    pub ml: Option<MlReport>,
    pub beeswarm: Option<BeeswarmExport>,
}

pub struct RunOutcome {
    pub manifest: RunManifest,
    pub artifacts: RunArtifacts,
}

struct Bundle<'a> {
    dir: &'a Path,
    written: Vec<FileChecksum>,
}

impl Bundle<'_> {
    fn write(&mut self, stage: Stage, name: &str, contents: &[u8]) -> Result<(), PipelineError> {
        fs::write(self.dir.join(name), contents).map_err(|e| PipelineError {
            stage,
            message: format!("writing {name}: {e}"),
        })?;
        self.written.push(FileChecksum {
            path: name.to_string(),
            sha256: sha256_hex(contents),
        });
        Ok(())
    }
}

fn checksum(path: &Path, stage: Stage) -> Result<FileChecksum, PipelineError> {
    let bytes = fs::read(path).map_err(|e| PipelineError {
        stage,
        message: format!("{}: {e}", path.display()),
    })?;
    Ok(FileChecksum {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

fn resolver(config: &PipelineConfig) -> Result<Resolver, PipelineError> {
    let cache = match &config.geocode_cache {
        Some(p) => GeocodeCache::load(p).map_err(at(Stage::Geocode))?,
        None => GeocodeCache::new(),
    };
    Ok(Resolver::offline(cache))
}

fn geocode_summary(corpus: &Corpus, resolver: &Resolver) -> GeocodeSummary {
    let mut seen = BTreeMap::new();
    for rec in corpus.records() {
        for a in &rec.authors {
            let aff = a.canonical_affiliation();
            seen.entry(aff.address_key())
                .or_insert_with(|| resolver.resolve(aff).is_ok());
        }
    }
    GeocodeSummary {
        affiliations: seen.len(),
        resolved: seen.values().filter(|&&ok| ok).count(),
        unresolved: seen.into_iter().filter(|(_, ok)| !ok).map(|(k, _)| k).collect(),
    }
}

fn docs_of(corpus: &Corpus) -> Vec<TokenizedDoc> {
    let analyzer = EnglishAnalyzer::default();
    corpus.records().iter().map(|r| tokenize(r, &analyzer)).collect()
}

/// Runs every stage up to and including `stop_after`, writing each stage's
/// artifacts into `out` and a manifest last. Stages that have no bundle file
/// of their own write a debug artifact when they are the stopping point.
pub fn run_until(config: &PipelineConfig, out: &Path, stop_after: Stage) -> Result<RunOutcome, PipelineError> {
    fs::create_dir_all(out).map_err(|e| PipelineError {
        stage: Stage::Ingest,
        message: format!("creating {}: {e}", out.display()),
    })?;
    let mut bundle = Bundle {
        dir: out,
        written: Vec::new(),
    };
    let mut arts = RunArtifacts::default();
    let mut completed = Vec::new();
    let mut inputs = Vec::new();
    let result = stages(config, stop_after, &mut bundle, &mut arts, &mut completed, &mut inputs);
    let failure = result.as_ref().err().map(|e| Failure {
        stage: e.stage,
        message: e.message.clone(),
    });
    let manifest = RunManifest {
        software: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        seeds: config.seeds(),
        inputs,
        complete: failure.is_none() && completed.last() == Some(&Stage::Report),
        completed_stages: completed,
        failure,
        artifacts: bundle.written.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let stage = manifest.failure.as_ref().map_or(stop_after, |f| f.stage);
    bundle.write(stage, "manifest.json", text.as_bytes())?;
    result?;
    Ok(RunOutcome {
        manifest,
        artifacts: arts,
    })
}

/// The full pipeline.
pub fn run_pipeline(config: &PipelineConfig, out: &Path) -> Result<RunOutcome, PipelineError> {
    run_until(config, out, Stage::Report)
}

fn stages(
    config: &PipelineConfig,
    stop_after: Stage,
    bundle: &mut Bundle,
    arts: &mut RunArtifacts,
    completed: &mut Vec<Stage>,
    inputs: &mut Vec<FileChecksum>,
) -> Result<(), PipelineError> {
    let seeds = config.seeds();
    let done = |completed: &mut Vec<Stage>, s: Stage| {
        completed.push(s);
        s == stop_after
    };

    // ingest
    inputs.push(checksum(&config.corpus, Stage::Ingest)?);
    let loaded = load_corpus(&config.corpus, &config.corpus_filter).map_err(at(Stage::Ingest))?;
    let corpus = scenario_filter(&loaded.corpus, config.scenario).map_err(at(Stage::Ingest))?;
    arts.exclusions = Some(loaded.exclusions);
    if done(completed, Stage::Ingest) {
        bundle.write(Stage::Ingest, "corpus.jsonl", corpus.to_canonical_string().as_bytes())?;
        arts.corpus = Some(corpus);
        return Ok(());
    }

    // geocode
    if let Some(p) = &config.geocode_cache {
        inputs.push(checksum(p, Stage::Geocode)?);
    }
    let resolver = resolver(config)?;
    let summary = geocode_summary(&corpus, &resolver);
    if summary.resolved == 0 {
        return Err(PipelineError {
            stage: Stage::Geocode,
            message: "no affiliation could be geocoded".into(),
        });
    }
    let stop = done(completed, Stage::Geocode);
    if stop {
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        bundle.write(Stage::Geocode, "geocode.json", text.as_bytes())?;
    }
    arts.geocode = Some(summary);
    if stop {
        arts.corpus = Some(corpus);
        return Ok(());
    }

    // windows
    let range = corpus.year_range().ok_or_else(|| PipelineError {
        stage: Stage::Windows,
        message: "corpus has no years".into(),
    })?;
    let windows = make_windows(range, &config.windows).map_err(at(Stage::Windows))?;
    let graphs: BTreeMap<usize, CoPubGraph> = windows
        .iter()
        .map(|w| (w.id, build_graph(&corpus, w.feature)))
        .collect();
    arts.windows = windows.clone();
    if done(completed, Stage::Windows) {
        #[derive(Serialize)]
        struct WindowInfo {
            window: WindowPair,
            nodes: usize,
            edges: usize,
        }
        let info: Vec<WindowInfo> = windows
            .iter()
            .map(|w| WindowInfo {
                window: *w,
                nodes: graphs[&w.id].node_count(),
                edges: graphs[&w.id].edge_count(),
            })
            .collect();
        let text = serde_json::to_string_pretty(&info).expect("windows serialize") + "\n";
        bundle.write(Stage::Windows, "windows.json", text.as_bytes())?;
        arts.corpus = Some(corpus);
        return Ok(());
    }

    // topics
    let docs = docs_of(&corpus);
    let base = LdaConfig {
        k: config.topics.k_grid.first().copied().unwrap_or(2),
        alpha: config.topics.alpha,
        beta: config.topics.beta,
        iterations: config.topics.iterations,
        seed: seeds.topics,
    };
    let selection =
        select_k(&docs, &config.topics.k_grid, &base, &config.topics.coherence).map_err(at(Stage::Topics))?;
    let topic_index = index_topic_vectors(&selection.fit.topic_vectors);
    if done(completed, Stage::Topics) {
        let mut coh = String::from("k,coherence\n");
        for (k, c) in &selection.scores {
            coh.push_str(&format!("{k},{}\n", crate::util::fmt_f64(c.mean)));
        }
        bundle.write(Stage::Topics, "coherence.csv", coh.as_bytes())?;
        bundle.write(
            Stage::Topics,
            "lda_model.json",
            selection.fit.model.to_json().as_bytes(),
        )?;
        bundle.write(
            Stage::Topics,
            "topic_vectors.csv",
            selection.fit.topic_vectors_csv().as_bytes(),
        )?;
        arts.topics = Some(selection);
        arts.corpus = Some(corpus);
        return Ok(());
    }
    arts.topics = Some(selection);

    // features, with descriptive statistics and the correlation screen
    let adjacency = AdjacencyTable::bundled(RegionLevel::for_scenario(config.scenario));
    let sources = FeatureSources {
        corpus: &corpus,
        scenario: config.scenario,
        resolver: &resolver,
        adjacency: &adjacency,
        earth: config.earth,
        topics: &topic_index,
    };
    let ds = assemble(&sources, &windows, &graphs, config.sampling, seeds.sampling).map_err(at(Stage::Features))?;
    let description = describe(&ds).map_err(at(Stage::Features))?;
    let screen = correlation_screen(&ds, &ds.schema(), config.correlation_threshold).map_err(at(Stage::Features))?;
    bundle.write(Stage::Features, "dataset.csv", ds.to_csv_string().as_bytes())?;
    let mut buf = Vec::new();
    crate::features::write_describe_csv(&description, &mut buf).map_err(at(Stage::Features))?;
    bundle.write(Stage::Features, "describe.csv", &buf)?;
    let mut buf = Vec::new();
    screen.write_csv(&mut buf).map_err(at(Stage::Features))?;
    bundle.write(Stage::Features, "corr.csv", &buf)?;
    let features = Feature::default_model_features(config.scenario, config.keep_continent);
    arts.model_features = features.clone();
    let stop = done(completed, Stage::Features);
    arts.dataset = Some(ds);
    if stop {
        arts.corpus = Some(corpus);
        return Ok(());
    }
    let ds = arts.dataset.as_ref().expect("set above");

    // logit
    let fit = fit_dataset(ds, &features, &config.logit).map_err(at(Stage::Fit))?;
    let title = format!(
        "Logit, scenario {}: co-publication in the outcome window",
        config.scenario.number()
    );
    bundle.write(Stage::Fit, "logit_table.txt", logit_table(&fit, &title).as_bytes())?;
    let curve = tenb_elasticity_curve(&fit, &default_distance_grid(), None).map_err(at(Stage::Fit))?;
    bundle.write(Stage::Fit, "elasticity.csv", elasticity_csv(&curve).as_bytes())?;
    arts.logit = Some(fit);
    arts.elasticity = curve;
    if done(completed, Stage::Fit) {
        arts.corpus = Some(corpus);
        return Ok(());
    }

    // ml
    let x = Matrix::from_rows(&ds.matrix(&features).map_err(at(Stage::Ml))?);
    let y = ds.labels();
    let split = SplitPlan {
        seed: seeds.split,
        ..config.ml.split
    };
    let plan = TunePlan {
        seed: seeds.tuning,
        ..config.ml.tuning
    };
    let report =
        run_protocol(&x, &y, &config.ml.kinds, &split, &plan, config.ml.smote.as_ref()).map_err(at(Stage::Ml))?;
    bundle.write(Stage::Ml, "ml_tuning.csv", tuning_log_csv(&report.log).as_bytes())?;
    bundle.write(Stage::Ml, "eval.json", (report.eval_json() + "\n").as_bytes())?;
    let stop = done(completed, Stage::Ml);
    arts.ml = Some(report);
    if stop {
        arts.corpus = Some(corpus);
        return Ok(());
    }
    let report = arts.ml.as_ref().expect("set above");

    // explain
    let chosen = match config.explain.model {
        Some(kind) => report
            .results
            .iter()
            .position(|r| r.kind == kind)
            .ok_or_else(|| PipelineError {
                stage: Stage::Explain,
                message: format!("{kind} was not trained"),
            })?,
        None => report.best().ok_or_else(|| PipelineError {
            stage: Stage::Explain,
            message: "no trained classifier".into(),
        })?,
    };
    let train_x = x.select(&report.split.train);
    let background = sample_background(&train_x, config.explain.background, seeds.background);
    let explained: Vec<usize> = report.split.test.iter().copied().take(config.explain.rows).collect();
    let rows = x.select(&explained);
    let explanations = explain_model(&report.models[chosen], &rows, &background).map_err(at(Stage::Explain))?;
    let names: Vec<String> = features.iter().map(|f| f.name().to_string()).collect();
    let swarm = beeswarm_export(&explanations, &rows, &names).map_err(at(Stage::Explain))?;
    bundle.write(Stage::Explain, "shap.csv", swarm.to_csv_string().as_bytes())?;
    arts.beeswarm = Some(swarm);
    if done(completed, Stage::Explain) {
        arts.corpus = Some(corpus);
        return Ok(());
    }

    // report
    bundle.write(
        Stage::Report,
        "beeswarm.svg",
        beeswarm_svg(arts.beeswarm.as_ref().expect("set above")).as_bytes(),
    )?;
    bundle.write(
        Stage::Report,
        "elasticity.svg",
        elasticity_svg(&arts.elasticity).as_bytes(),
    )?;
    done(completed, Stage::Report);
    arts.corpus = Some(corpus);
    Ok(())
}
