use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use proxilink::explain::{beeswarm_svg, elasticity_svg, BeeswarmExport};
use proxilink::logit::parse_elasticity_csv;
use proxilink::pipeline::{run_until, PipelineConfig, RunOutcome, Stage};
use proxilink::synthetic::{synthetic_corpus, to_jsonl, SyntheticCorpusConfig};
use proxilink::ScenarioId;

/// Co-authorship link prediction from proximity features.
#[derive(Parser)]
#[command(name = "proxilink", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration; relative paths inside it are read from its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Corpus file (JSONL); overrides the configured one.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Master seed; overrides the configured one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Geographic scenario, 1 to 4; overrides the configured one.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=4))]
    scenario: Option<u8>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Load, validate and scenario-filter the corpus; writes corpus.jsonl.
    Ingest,
    /// Resolve canonical affiliations; writes geocode.json.
    Geocode,
    /// Build feature/outcome windows and their graphs; writes windows.json.
    Windows,
    /// Fit topic models over the K grid; writes coherence.csv, lda_model.json, topic_vectors.csv.
    Topics,
    /// Assemble pair rows; writes dataset.csv, describe.csv, corr.csv.
    Features,
    /// Fit the logit; writes logit_table.txt and elasticity.csv.
    Fit,
    /// Tune, train and test the classifiers; writes ml_tuning.csv and eval.json.
    Ml,
    /// Shapley values for the explained classifier; writes shap.csv.
    Explain,
    /// Re-render beeswarm.svg and elasticity.svg from shap.csv and elasticity.csv in --out.
    Report,
    /// Every stage; writes the full bundle.
    Run,
    /// Print the effective configuration as JSON.
    Config,
    /// Write a synthetic corpus.
    Synth {
        /// Destination JSONL file.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        authors: Option<usize>,
        #[arg(long)]
        pubs_per_year: Option<usize>,
    },
}

fn load_config(g: &Global) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut cfg = PipelineConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
            let base = path.parent().unwrap_or(Path::new(""));
            if cfg.corpus.is_relative() && !cfg.corpus.as_os_str().is_empty() {
                cfg.corpus = base.join(&cfg.corpus);
            }
            if let Some(cache) = cfg.geocode_cache.as_mut().filter(|c| c.is_relative()) {
                *cache = base.join(&*cache);
            }
            cfg
        }
        None => PipelineConfig::synthetic(PathBuf::new()),
    };
    if let Some(c) = &g.corpus {
        cfg.corpus = c.clone();
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(s) = g.scenario {
        cfg.scenario = ScenarioId::try_from(s).map_err(anyhow::Error::msg)?;
    }
    if cfg.corpus.as_os_str().is_empty() {
        bail!("no corpus given: pass --corpus or a --config that names one");
    }
    Ok(cfg)
}

fn summarize(outcome: &RunOutcome) {
    let a = &outcome.artifacts;
    if let Some(c) = &a.corpus {
        println!("publications: {}", c.len());
    }
    if let Some(e) = &a.exclusions {
        println!("excluded records: {}", e.total());
    }
    if let Some(g) = &a.geocode {
        println!("affiliations resolved: {}/{}", g.resolved, g.affiliations);
    }
    if !a.windows.is_empty() {
        println!("windows: {}", a.windows.len());
    }
    if let Some(t) = &a.topics {
        println!("topics: K = {}", t.chosen);
    }
    if let Some(d) = &a.dataset {
        let positives = d.labels().iter().filter(|&&y| y).count();
        println!("pair rows: {} ({} positive)", d.len(), positives);
    }
    if let Some(f) = &a.logit {
        println!("logit pseudo R2: {:.4}", f.pseudo_r2);
    }
    if let Some(m) = &a.ml {
        for r in &m.results {
            println!(
                "{:<24} cv auc {:.4}  test auc {:.4}  ({:.1} s)",
                r.kind.to_string(),
                r.mean_auc,
                r.test_auc,
                r.wall_time_ms / 1e3
            );
        }
    }
    if let Some(b) = &a.beeswarm {
        println!("feature ranking: {}", b.ranking().join(" > "));
    }
    println!(
        "manifest: {} ({})",
        if outcome.manifest.complete {
            "complete"
        } else {
            "partial"
        },
        outcome.manifest.artifacts.len() + 1
    );
}

fn rerender(out: &Path) -> Result<()> {
    let shap =
        fs::File::open(out.join("shap.csv")).with_context(|| format!("reading {}", out.join("shap.csv").display()))?;
    let swarm = BeeswarmExport::read_csv(shap)?;
    let curve_text = fs::read_to_string(out.join("elasticity.csv")).context("reading elasticity.csv")?;
    let curve = parse_elasticity_csv(&curve_text).map_err(anyhow::Error::msg)?;
    fs::write(out.join("beeswarm.svg"), beeswarm_svg(&swarm))?;
    fs::write(out.join("elasticity.svg"), elasticity_svg(&curve))?;
    println!("wrote beeswarm.svg and elasticity.svg to {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let stage = match &cli.command {
        Command::Ingest => Stage::Ingest,
        Command::Geocode => Stage::Geocode,
        Command::Windows => Stage::Windows,
        Command::Topics => Stage::Topics,
        Command::Features => Stage::Features,
        Command::Fit => Stage::Fit,
        Command::Ml => Stage::Ml,
        Command::Explain => Stage::Explain,
        Command::Run => Stage::Report,
        Command::Report => return rerender(&cli.global.out),
        Command::Config => {
            println!("{}", load_config(&cli.global)?.to_json());
            return Ok(());
        }
        Command::Synth {
            output,
            authors,
            pubs_per_year,
        } => {
            let mut cfg = SyntheticCorpusConfig::default();
            if let Some(s) = cli.global.seed {
                cfg.seed = s;
            }
            cfg.authors = authors.unwrap_or(cfg.authors);
            cfg.pubs_per_year = pubs_per_year.unwrap_or(cfg.pubs_per_year);
            let records = synthetic_corpus(&cfg);
            fs::write(output, to_jsonl(&records)).with_context(|| format!("writing {}", output.display()))?;
            println!("wrote {} records to {}", records.len(), output.display());
            return Ok(());
        }
    };
    let cfg = load_config(&cli.global)?;
    let outcome = run_until(&cfg, &cli.global.out, stage)?;
    summarize(&outcome);
    Ok(())
}
