use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_labels, Matrix, MlError, Standardizer};
use crate::util::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteConfig {
    pub k: usize,
    /// Target minority / majority ratio after oversampling.
    pub target_ratio: f64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k: 5,
            target_ratio: 1.0,
        }
    }
}

/// Provenance of an output row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Origin {
    /// Index into the input rows.
    Original(usize),
    /// `base + u * (neighbor - base)` for two input minority rows.
    Synthetic { base: usize, neighbor: usize, u: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutput {
    /// Input rows in order, then the synthetic rows.
    pub x: Matrix,
    pub y: Vec<bool>,
    pub origin: Vec<Origin>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Oversamples the minority class by interpolating towards one of each row's
/// `k` nearest minority neighbours (Euclidean on standardized features,
/// distance ties to the lower index). Base rows are taken in turn.
pub fn smote(x: &Matrix, y: &[bool], config: &SmoteConfig, seed: u64) -> Result<SmoteOutput, MlError> {
    check_labels(x, y)?;
    let n_pos = y.iter().filter(|&&v| v).count();
    let minority_label = n_pos * 2 <= y.len();
    let minority: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority_label).collect();
    let n_min = minority.len();
    let n_maj = y.len() - n_min;
    if config.k == 0 || n_min < config.k + 1 {
        return Err(MlError::MinorityTooSmall {
            minority: n_min,
            k: config.k,
        });
    }
    let target = (config.target_ratio * n_maj as f64).ceil() as usize;
    let n_new = target.saturating_sub(n_min);

    let mut out = SmoteOutput {
        x: x.clone(),
        y: y.to_vec(),
        origin: (0..y.len()).map(Origin::Original).collect(),
    };
    if n_new == 0 {
        return Ok(out);
    }
    let scaler = Standardizer::fit(&x.select(&minority));
    let z: Vec<Vec<f64>> = minority.iter().map(|&i| scaler.apply(x.row(i))).collect();
    let neighbours: Vec<Vec<usize>> = (0..n_min)
        .map(|a| {
            let mut d: Vec<(f64, usize)> = (0..n_min)
                .filter(|&b| b != a)
                .map(|b| (squared_distance(&z[a], &z[b]), b))
                .collect();
            d.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
            d.into_iter().take(config.k).map(|(_, b)| b).collect()
        })
        .collect();
    let mut rng = stream_rng(seed, 0x5307E);
    for s in 0..n_new {
        let a = s % n_min;
        let b = neighbours[a][rng.gen_range(0..config.k)];
        let mut u: f64 = rng.gen();
        while u == 0.0 {
            u = rng.gen();
        }
        let (base, nb) = (x.row(minority[a]), x.row(minority[b]));
        let row: Vec<f64> = base.iter().zip(nb).map(|(p, q)| p + u * (q - p)).collect();
        out.x.push_row(&row);
        out.y.push(minority_label);
        out.origin.push(Origin::Synthetic {
            base: minority[a],
            neighbor: minority[b],
            u,
        });
    }
    Ok(out)
}
