//! Co-authorship link prediction from proximity features.
//!
//! The crate turns a corpus of publication records into per-window
//! co-authorship networks, derives geographical, network, cognitive,
//! institutional and contiguity proximity features for candidate author
//! pairs, and predicts future co-publication with an inferential logit and
//! a cross-validated classifier pipeline explained by exact Shapley values.
//!
//! Modules follow the pipeline order:
//!
//! * [`corpus`] ingestion, validation and scenario filtering
//! * [`geo`] coordinates, great-circle distance, region binaries
//! * [`network`] sliding windows, co-publication graphs, TENB, candidate pairs
//! * [`topics`] tokenization, collapsed Gibbs LDA, coherence, knowledge vectors
//! * [`features`] per-pair observation rows, descriptive statistics, correlation screen
//! * [`logit`] IRLS logistic regression and its reports
//! * [`ml`] SMOTE, stratified CV, six classifiers, two-stage tuning, AUC
//! * [`explain`] exact Shapley values, beeswarm and SVG exports
//! * [`pipeline`] the end-to-end run and its manifest
//! * [`synthetic`] seeded generators for pair tables and a small corpus

pub mod corpus;
pub mod explain;
pub mod features;
pub mod geo;
pub mod logit;
pub mod ml;
pub mod network;
pub mod pipeline;
pub mod synthetic;
pub mod topics;

mod util;

pub use corpus::{Corpus, PublicationRecord, ScenarioId};
pub use features::{Dataset, PairObservation};
pub use geo::{EarthModel, GeoPoint};
pub use logit::LogitFit;
