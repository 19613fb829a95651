use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use proxilink::pipeline::{run_until, PipelineConfig, RunManifest, Stage};
use sha2::{Digest, Sha256};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_corpus.jsonl")
}

fn manifest(dir: &std::path::Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn partial_run_stops_with_an_honest_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig::synthetic(fixture());
    let outcome = run_until(&config, dir.path(), Stage::Features).unwrap();
    let m = manifest(dir.path());
    assert_eq!(m, outcome.manifest);
    assert!(!m.complete);
    assert!(m.failure.is_none());
    assert_eq!(m.completed_stages, Stage::ALL[..5].to_vec());
    let names: Vec<&str> = m.artifacts.iter().map(|a| a.path.as_str()).collect();
    assert_eq!(names, ["dataset.csv", "describe.csv", "corr.csv"]);
    for a in &m.artifacts {
        let bytes = fs::read(dir.path().join(&a.path)).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&bytes)), a.sha256, "{}", a.path);
    }
    assert_eq!(m.inputs.len(), 1);
    assert_eq!(m.seeds, config.seeds());

    let a = &outcome.artifacts;
    assert_eq!(a.windows.len(), 6);
    let geo = a.geocode.as_ref().unwrap();
    assert_eq!(geo.resolved, geo.affiliations);
    let ds = a.dataset.as_ref().unwrap();
    let positives = ds.labels().iter().filter(|&&y| y).count();
    assert!(positives > 0 && positives < ds.len());
}

#[test]
fn later_stages_reuse_identical_features() {
    let config = PipelineConfig::synthetic(fixture());
    let early = tempfile::tempdir().unwrap();
    let late = tempfile::tempdir().unwrap();
    run_until(&config, early.path(), Stage::Features).unwrap();
    let outcome = run_until(&config, late.path(), Stage::Fit).unwrap();
    for name in ["dataset.csv", "describe.csv", "corr.csv"] {
        assert_eq!(
            fs::read(early.path().join(name)).unwrap(),
            fs::read(late.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let fit = outcome.artifacts.logit.unwrap();
    assert!(fit.converged);
    assert!(fit.coefficient("ln_geo").unwrap() < 0.0);
    assert!(fit.coefficient("cog_distance").unwrap() < 0.0);
    let table = fs::read_to_string(late.path().join("logit_table.txt")).unwrap();
    assert!(table.contains("ln_tenb"));
    let curve = fs::read_to_string(late.path().join("elasticity.csv")).unwrap();
    assert_eq!(
        proxilink::logit::parse_elasticity_csv(&curve).unwrap(),
        outcome.artifacts.elasticity
    );
}

#[test]
fn debug_artifacts_belong_to_the_stopping_stage() {
    let config = PipelineConfig::synthetic(fixture());
    for (stage, file) in [
        (Stage::Ingest, "corpus.jsonl"),
        (Stage::Geocode, "geocode.json"),
        (Stage::Windows, "windows.json"),
    ] {
        let dir = tempfile::tempdir().unwrap();
        run_until(&config, dir.path(), stage).unwrap();
        let files: BTreeSet<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        let want: BTreeSet<String> = [file, "manifest.json"].map(String::from).into();
        assert_eq!(files, want, "{stage:?}");
    }
}

#[test]
fn unreadable_corpus_fails_at_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig::synthetic(dir.path().join("absent.jsonl"));
    let err = run_until(&config, dir.path(), Stage::Report).err().unwrap();
    assert_eq!(err.stage, Stage::Ingest);
    let m = manifest(dir.path());
    assert!(!m.complete);
    assert_eq!(m.failure.unwrap().stage, Stage::Ingest);
    assert!(m.completed_stages.is_empty());
}
