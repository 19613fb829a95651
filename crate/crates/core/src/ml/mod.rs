//! Rebalancing, stratified resampling, six classifiers, two-stage tuning and AUC.

mod auc;
mod classifiers;
mod smote;
mod split;
mod tree;
mod tune;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use auc::auc;
pub use classifiers::{param_space, train, ClassifierKind, ClassifierSpec, Hyperparameters, Model, ParamAxis};
pub use smote::{smote, Origin, SmoteConfig, SmoteOutput};
pub use split::{stratified_folds, stratified_split, SplitPlan, TrainTest};
pub use tree::{best_split, fit_presorted, fit_tree, Node, Presorted, Split, Tree, TreeParams};
pub use tune::{
    cross_validate, run_protocol, tune, tuning_log_csv, EvalResult, FoldRecord, MlReport, TuneLogEntry, TunePlan,
};

#[derive(Debug, Error, PartialEq)]
pub enum MlError {
    #[error("labels contain a single class")]
    SingleClass,
    #[error("minority class has {minority} rows; k = {k} needs at least {}", k + 1)]
    MinorityTooSmall { minority: usize, k: usize },
    #[error("class {class} has {count} rows, fewer than {folds} folds")]
    ClassSmallerThanFolds { class: bool, count: usize, folds: usize },
    #[error("invalid hyperparameter `{name}` = {value} for {kind}")]
    InvalidHyperparameter {
        kind: ClassifierKind,
        name: String,
        value: f64,
    },
    #[error("{0} rows but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("no rows")]
    Empty,
    #[error("every candidate fit failed for {0}")]
    AllFitsFailed(ClassifierKind),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn new(cols: usize) -> Self {
        Matrix {
            data: Vec::new(),
            rows: 0,
            cols,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Matrix::new(cols);
        for r in rows {
            m.push_row(r);
        }
        m
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row width");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn select(&self, idx: &[usize]) -> Matrix {
        let mut m = Matrix::new(self.cols);
        for &i in idx {
            m.push_row(self.row(i));
        }
        m
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter_rows().map(<[f64]>::to_vec).collect()
    }
}

/// Per-column centring and scaling; constant columns keep unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows().max(1) as f64;
        let mut mean = vec![0.0; x.cols()];
        for r in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut sd = vec![0.0; x.cols()];
        for r in x.iter_rows() {
            for ((s, v), m) in sd.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        for s in sd.iter_mut() {
            *s = (*s / n).sqrt();
            if *s <= 1e-12 {
                *s = 1.0;
            }
        }
        Standardizer { mean, sd }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut m = Matrix::new(x.cols());
        for r in x.iter_rows() {
            m.push_row(&self.apply(r));
        }
        m
    }
}

pub(crate) fn check_labels(x: &Matrix, y: &[bool]) -> Result<(), MlError> {
    if x.rows() != y.len() {
        return Err(MlError::LengthMismatch(x.rows(), y.len()));
    }
    if y.is_empty() {
        return Err(MlError::Empty);
    }
    let pos = y.iter().filter(|&&v| v).count();
    if pos == 0 || pos == y.len() {
        return Err(MlError::SingleClass);
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_and_standardizer() {
        let m = Matrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        assert_eq!(m.row(1), &[3.0, 5.0]);
        assert_eq!(m.select(&[1, 1]).rows(), 2);
        let s = Standardizer::fit(&m);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.sd, vec![1.0, 1.0]);
        assert_eq!(s.apply(&[3.0, 5.0]), vec![1.0, 0.0]);
    }
}
