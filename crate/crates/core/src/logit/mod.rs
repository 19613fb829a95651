//! Maximum-likelihood logistic regression by IRLS, with Wald inference,
//! McFadden pseudo-R², BIC, effect sizes and the TENB elasticity curve.

mod report;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

pub use report::{elasticity_csv, logit_table, parse_elasticity_csv, stars};

use crate::features::{Dataset, Feature, FeatureError};

pub const INTERCEPT: &str = "intercept";

#[derive(Debug, Error, PartialEq)]
pub enum LogitError {
    #[error("no observations")]
    Empty,
    #[error("outcome has a single class")]
    SingleClass,
    #[error("design matrix is rank deficient: `{0}` is a linear combination of earlier columns")]
    RankDeficient(String),
    #[error("separation detected after {iterations} iterations: coefficient of `{column}` diverges")]
    Separation { column: String, iterations: usize },
    #[error("no convergence within {0} iterations")]
    NotConverged(usize),
    #[error("{0} column names for {1} columns")]
    NameMismatch(usize, usize),
    #[error("null log-likelihood is zero")]
    ZeroNullLoglik,
    #[error("fit has no coefficient `{0}`")]
    MissingCoefficient(String),
    #[error("{0}")]
    Feature(String),
}

impl From<FeatureError> for LogitError {
    fn from(e: FeatureError) -> Self {
        LogitError::Feature(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogitConfig {
    pub max_iterations: usize,
    pub score_tolerance: f64,
    pub relative_loglik_tolerance: f64,
}

impl Default for LogitConfig {
    fn default() -> Self {
        LogitConfig {
            max_iterations: 100,
            score_tolerance: 1e-8,
            relative_loglik_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitFit {
    /// Column names, `intercept` first.
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    pub loglik: f64,
    pub null_loglik: f64,
    pub pseudo_r2: f64,
    pub bic: f64,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl LogitFit {
    pub fn coefficient(&self, name: &str) -> Result<f64, LogitError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.beta[k])
            .ok_or_else(|| LogitError::MissingCoefficient(name.to_string()))
    }

    /// Positive-class probability for one row of regressors (no intercept column).
    pub fn predict(&self, row: &[f64]) -> f64 {
        let eta = self.beta[0] + self.beta[1..].iter().zip(row).map(|(b, x)| b * x).sum::<f64>();
        sigmoid(eta)
    }
}

pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^eta)` without overflow.
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Prepends the intercept column.
pub fn design_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let p = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), p + 1, |r, c| if c == 0 { 1.0 } else { rows[r][c - 1] })
}

pub fn response(y: &[bool]) -> DVector<f64> {
    DVector::from_iterator(y.len(), y.iter().map(|&v| f64::from(v)))
}

pub fn loglik(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter().zip(y.iter()).map(|(&e, &yi)| yi * e - softplus(e)).sum()
}

/// Gradient of the log-likelihood, `X'(y - p)`.
pub fn score(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
    let p = (x * beta).map(sigmoid);
    x.tr_mul(&(y - p))
}

/// Hessian of the log-likelihood, `-X'WX`.
pub fn hessian(x: &DMatrix<f64>, beta: &DVector<f64>) -> DMatrix<f64> {
    -information(x, beta)
}

fn information(x: &DMatrix<f64>, beta: &DVector<f64>) -> DMatrix<f64> {
    let w = (x * beta).map(|e| {
        let p = sigmoid(e);
        p * (1.0 - p)
    });
    let mut xw = x.clone();
    for (mut row, wi) in xw.row_iter_mut().zip(w.iter()) {
        row *= *wi;
    }
    x.tr_mul(&xw)
}

/// Index of the first column that is (numerically) spanned by earlier ones.
fn first_dependent_column(x: &DMatrix<f64>) -> Option<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for c in 0..x.ncols() {
        let col = x.column(c).into_owned();
        let norm0 = col.norm();
        let mut v = col;
        for _ in 0..2 {
            for q in &basis {
                let d = q.dot(&v);
                v -= q * d;
            }
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= 1e-9 * norm0 {
            return Some(c);
        }
        basis.push(v / norm);
    }
    None
}

pub fn null_loglik(y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let n1 = y.sum();
    let n0 = n - n1;
    let p = n1 / n;
    let t = |count: f64, q: f64| if count > 0.0 { count * q.ln() } else { 0.0 };
    t(n1, p) + t(n0, 1.0 - p)
}

/// McFadden: `1 - loglik / null_loglik`.
pub fn pseudo_r2(loglik: f64, null_loglik: f64) -> Result<f64, LogitError> {
    if null_loglik == 0.0 {
        return Err(LogitError::ZeroNullLoglik);
    }
    Ok(1.0 - loglik / null_loglik)
}

pub fn bic(k: usize, n: usize, loglik: f64) -> f64 {
    k as f64 * (n as f64).ln() - 2.0 * loglik
}

/// Relative change in the odds from switching a binary regressor on: `1 - e^beta`.
pub fn effect_pct(beta: f64) -> f64 {
    1.0 - beta.exp()
}

/// Fits `y ~ 1 + x` where `rows` excludes the intercept.
pub fn fit_logit(
    rows: &[Vec<f64>],
    y: &[bool],
    names: &[String],
    config: &LogitConfig,
) -> Result<LogitFit, LogitError> {
    if rows.is_empty() || rows.len() != y.len() {
        return Err(LogitError::Empty);
    }
    let p = rows[0].len();
    if names.len() != p {
        return Err(LogitError::NameMismatch(names.len(), p));
    }
    let mut all_names = vec![INTERCEPT.to_string()];
    all_names.extend(names.iter().cloned());
    let n1 = y.iter().filter(|&&v| v).count();
    if n1 == 0 || n1 == y.len() {
        return Err(LogitError::SingleClass);
    }
    let x = design_matrix(rows);
    if let Some(c) = first_dependent_column(&x) {
        return Err(LogitError::RankDeficient(all_names[c].clone()));
    }
    let yv = response(y);
    let n = y.len();
    let k = x.ncols();

    let scale: Vec<f64> = (0..k)
        .map(|c| {
            let col = x.column(c);
            let m = col.mean();
            let sd = (col.map(|v| (v - m).powi(2)).sum() / n as f64).sqrt();
            if c == 0 {
                1.0
            } else {
                sd
            }
        })
        .collect();
    let divergent = |beta: &DVector<f64>| (1..k).chain([0]).find(|&c| (beta[c] * scale[c]).abs() > 40.0);

    let mut beta = DVector::zeros(k);
    let mut ll = loglik(&x, &yv, &beta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let g = score(&x, &yv, &beta);
        if g.amax() < config.score_tolerance {
            converged = true;
            break;
        }
        let info = information(&x, &beta);
        let Some(chol) = info.cholesky() else {
            let column = divergent(&beta).unwrap_or(0);
            return Err(LogitError::Separation {
                column: all_names[column].clone(),
                iterations,
            });
        };
        let step = chol.solve(&g);
        let mut t = 1.0;
        let (mut next, mut next_ll);
        loop {
            next = &beta + &step * t;
            next_ll = loglik(&x, &yv, &next);
            if next_ll >= ll - 1e-12 * ll.abs() || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        let rel = (next_ll - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        beta = next;
        ll = next_ll;
        if ll > -1e-6 {
            break;
        }
        if rel < config.relative_loglik_tolerance {
            converged = true;
            break;
        }
    }
    if ll > -1e-6 || divergent(&beta).is_some() {
        let column = divergent(&beta)
            .or_else(|| (1..k).max_by(|&a, &b| (beta[a] * scale[a]).abs().total_cmp(&(beta[b] * scale[b]).abs())))
            .unwrap_or(0);
        return Err(LogitError::Separation {
            column: all_names[column].clone(),
            iterations,
        });
    }
    if !converged {
        return Err(LogitError::NotConverged(iterations));
    }
    let cov = information(&x, &beta)
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| LogitError::RankDeficient(all_names[k - 1].clone()))?;
    let se: Vec<f64> = (0..k).map(|c| cov[(c, c)].sqrt()).collect();
    let z: Vec<f64> = (0..k).map(|c| beta[c] / se[c]).collect();
    let pv: Vec<f64> = z.iter().map(|&zc| erfc(zc.abs() / std::f64::consts::SQRT_2)).collect();
    let null = null_loglik(&yv);
    Ok(LogitFit {
        names: all_names,
        beta: beta.iter().copied().collect(),
        se,
        z,
        p: pv,
        loglik: ll,
        null_loglik: null,
        pseudo_r2: pseudo_r2(ll, null)?,
        bic: bic(k, n, ll),
        n,
        converged,
        iterations,
    })
}

pub fn fit_dataset(ds: &Dataset, features: &[Feature], config: &LogitConfig) -> Result<LogitFit, LogitError> {
    let rows = ds.matrix(features)?;
    let names: Vec<String> = features.iter().map(|f| f.name().to_string()).collect();
    fit_logit(&rows, &ds.labels(), &names, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticityPoint {
    pub distance_km: f64,
    /// `beta_tenb + beta_interaction * ln(1 + d)`.
    pub elasticity: f64,
    /// The same scaled by `1 - at_p`, when a reference probability was given.
    pub probability_elasticity: Option<f64>,
}

/// 0 km followed by 41 log-spaced distances from 1 to 10,000 km.
pub fn default_distance_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend((0..=40).map(|k| 10f64.powf(k as f64 / 10.0)));
    g
}

pub fn elasticity_at(beta_tenb: f64, beta_interaction: f64, distance_km: f64) -> f64 {
    beta_tenb + beta_interaction * distance_km.ln_1p()
}

pub fn tenb_elasticity_curve(
    fit: &LogitFit,
    grid: &[f64],
    at_p: Option<f64>,
) -> Result<Vec<ElasticityPoint>, LogitError> {
    let bt = fit.coefficient(Feature::LnTenb.name())?;
    let bi = fit.coefficient(Feature::Interaction.name())?;
    Ok(grid
        .iter()
        .map(|&d| {
            let e = elasticity_at(bt, bi, d);
            ElasticityPoint {
                distance_km: d,
                elasticity: e,
                probability_elasticity: at_p.map(|p| e * (1.0 - p)),
            }
        })
        .collect())
}
