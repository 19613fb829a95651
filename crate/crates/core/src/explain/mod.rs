//! Exact Shapley values by coalition enumeration, beeswarm exports and SVG plots.

mod svg;

use std::io::Write;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use svg::{beeswarm_svg, elasticity_svg};

use crate::ml::{Matrix, Model};
use crate::util::{fmt_f64, stream_rng};

/// Coalitions are enumerated exhaustively, so the feature count is capped.
pub const MAX_FEATURES: usize = 15;

#[derive(Debug, Error, PartialEq)]
pub enum ExplainError {
    #[error("{0} features exceed the exact-enumeration limit of {MAX_FEATURES}")]
    TooManyFeatures(usize),
    #[error("background sample is empty")]
    EmptyBackground,
    #[error("row has {got} values, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("nothing to export")]
    Empty,
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyExplanation {
    pub row_id: usize,
    /// Mean model output over the background sample.
    pub base_value: f64,
    pub phi: Vec<f64>,
    pub model_output: f64,
}

/// Shapley weight `|S|! (F - |S| - 1)! / F!` for each coalition size.
fn coalition_weights(f: usize) -> Vec<f64> {
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    (0..f).map(|s| fact(s) * fact(f - s - 1) / fact(f)).collect()
}

/// Exact Shapley values of `model` at `row`. The value of a coalition is the
/// mean output when the features outside it are taken from each background row.
pub fn exact_shapley<M>(
    model: M,
    row_id: usize,
    row: &[f64],
    background: &[Vec<f64>],
) -> Result<ShapleyExplanation, ExplainError>
where
    M: Fn(&[f64]) -> f64,
{
    let f = row.len();
    if f > MAX_FEATURES {
        return Err(ExplainError::TooManyFeatures(f));
    }
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    if let Some(b) = background.iter().find(|b| b.len() != f) {
        return Err(ExplainError::DimensionMismatch {
            expected: f,
            got: b.len(),
        });
    }
    let n_masks = 1usize << f;
    let mut z = vec![0.0; f];
    let value: Vec<f64> = (0..n_masks)
        .map(|mask| {
            let mut total = 0.0;
            for b in background {
                for j in 0..f {
                    z[j] = if mask >> j & 1 == 1 { row[j] } else { b[j] };
                }
                total += model(&z);
            }
            total / background.len() as f64
        })
        .collect();
    let w = coalition_weights(f);
    let phi = (0..f)
        .map(|j| {
            let bit = 1usize << j;
            (0..n_masks)
                .filter(|m| m & bit == 0)
                .map(|m| w[m.count_ones() as usize] * (value[m | bit] - value[m]))
                .sum()
        })
        .collect();
    Ok(ShapleyExplanation {
        row_id,
        base_value: value[0],
        phi,
        model_output: model(row),
    })
}

/// Draws up to `size` distinct rows in index order.
pub fn sample_background(x: &Matrix, size: usize, seed: u64) -> Vec<Vec<f64>> {
    let take = size.min(x.rows());
    let mut idx = index::sample(&mut stream_rng(seed, 0xBA6), x.rows(), take).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| x.row(i).to_vec()).collect()
}

/// Explains each row of `rows` (ids are positions) against `background`.
pub fn explain_model(
    model: &Model,
    rows: &Matrix,
    background: &[Vec<f64>],
) -> Result<Vec<ShapleyExplanation>, ExplainError> {
    (0..rows.rows())
        .into_par_iter()
        .map(|i| exact_shapley(|z: &[f64]| model.predict_proba(z), i, rows.row(i), background))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmPoint {
    pub row_id: usize,
    pub phi: f64,
    pub feature_value: f64,
    /// Min-max scaled over the explained rows; 0.5 for a constant feature.
    pub normalized_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSwarm {
    pub feature: String,
    pub mean_abs_phi: f64,
    pub points: Vec<BeeswarmPoint>,
}

/// Features from most to least important by mean |phi|; ties keep declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmExport {
    pub features: Vec<FeatureSwarm>,
}

impl BeeswarmExport {
    pub fn ranking(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.feature.as_str()).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ExplainError> {
        let err = |e: csv::Error| ExplainError::Io(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "rank",
            "feature",
            "mean_abs_phi",
            "row_id",
            "phi",
            "feature_value",
            "normalized_value",
        ])
        .map_err(err)?;
        for (rank, f) in self.features.iter().enumerate() {
            for p in &f.points {
                out.write_record([
                    (rank + 1).to_string(),
                    f.feature.clone(),
                    fmt_f64(f.mean_abs_phi),
                    p.row_id.to_string(),
                    fmt_f64(p.phi),
                    fmt_f64(p.feature_value),
                    fmt_f64(p.normalized_value),
                ])
                .map_err(err)?;
            }
        }
        out.flush().map_err(|e| ExplainError::Io(e.to_string()))
    }

    /// Inverse of [`BeeswarmExport::write_csv`].
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self, ExplainError> {
        let err = |e: String| ExplainError::Io(e);
        let mut features: Vec<FeatureSwarm> = Vec::new();
        for rec in csv::Reader::from_reader(r).records() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            if rec.len() != 7 {
                return Err(err(format!("expected 7 columns, found {}", rec.len())));
            }
            let num = |k: usize| rec[k].parse::<f64>().map_err(|e| err(format!("column {k}: {e}")));
            let point = BeeswarmPoint {
                row_id: rec[3].parse().map_err(|e| err(format!("row_id: {e}")))?,
                phi: num(4)?,
                feature_value: num(5)?,
                normalized_value: num(6)?,
            };
            match features.last_mut() {
                Some(f) if f.feature == rec[1] => f.points.push(point),
                _ => features.push(FeatureSwarm {
                    feature: rec[1].to_string(),
                    mean_abs_phi: num(2)?,
                    points: vec![point],
                }),
            }
        }
        if features.is_empty() {
            return Err(ExplainError::Empty);
        }
        Ok(BeeswarmExport { features })
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8")
    }
}

/// `rows[e.row_id]` holds the feature values behind explanation `e`.
pub fn beeswarm_export(
    explanations: &[ShapleyExplanation],
    rows: &Matrix,
    names: &[String],
) -> Result<BeeswarmExport, ExplainError> {
    if explanations.is_empty() {
        return Err(ExplainError::Empty);
    }
    let f = names.len();
    if let Some(e) = explanations.iter().find(|e| e.phi.len() != f) {
        return Err(ExplainError::DimensionMismatch {
            expected: f,
            got: e.phi.len(),
        });
    }
    let mut features: Vec<FeatureSwarm> = (0..f)
        .map(|j| {
            let vals: Vec<f64> = explanations.iter().map(|e| rows.get(e.row_id, j)).collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let points = explanations
                .iter()
                .zip(&vals)
                .map(|(e, &v)| BeeswarmPoint {
                    row_id: e.row_id,
                    phi: e.phi[j],
                    feature_value: v,
                    normalized_value: if hi > lo { (v - lo) / (hi - lo) } else { 0.5 },
                })
                .collect();
            FeatureSwarm {
                feature: names[j].clone(),
                mean_abs_phi: explanations.iter().map(|e| e.phi[j].abs()).sum::<f64>() / explanations.len() as f64,
                points,
            }
        })
        .collect();
    features.sort_by(|a, b| b.mean_abs_phi.total_cmp(&a.mean_abs_phi));
    Ok(BeeswarmExport { features })
}
