use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_presorted, Presorted, Tree, TreeParams};
use super::{check_labels, Matrix, MlError, Standardizer};
use crate::util::{derive_seed, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    LogisticSgd,
    GaussianNaiveBayes,
    KNearestNeighbors,
    LinearSvm,
    RandomForest,
    GradientBoostedTrees,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 6] = [
        ClassifierKind::LogisticSgd,
        ClassifierKind::GaussianNaiveBayes,
        ClassifierKind::KNearestNeighbors,
        ClassifierKind::LinearSvm,
        ClassifierKind::RandomForest,
        ClassifierKind::GradientBoostedTrees,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::LogisticSgd => "logistic-sgd",
            ClassifierKind::GaussianNaiveBayes => "gaussian-naive-bayes",
            ClassifierKind::KNearestNeighbors => "k-nearest-neighbors",
            ClassifierKind::LinearSvm => "linear-svm",
            ClassifierKind::RandomForest => "random-forest",
            ClassifierKind::GradientBoostedTrees => "gradient-boosted-trees",
        }
    }

    /// The hyperparameter that measures model size, used to break CV ties.
    pub fn size_parameter(self) -> Option<&'static str> {
        match self {
            ClassifierKind::LogisticSgd | ClassifierKind::LinearSvm => Some("epochs"),
            ClassifierKind::GaussianNaiveBayes => None,
            ClassifierKind::KNearestNeighbors => Some("k"),
            ClassifierKind::RandomForest | ClassifierKind::GradientBoostedTrees => Some("n_trees"),
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown classifier `{s}`"))
    }
}

pub type Hyperparameters = BTreeMap<String, f64>;

/// A tunable hyperparameter and its valid range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamAxis {
    pub name: &'static str,
    pub low: f64,
    pub high: f64,
    pub default: f64,
    /// Sampled and gridded on a log scale.
    pub log: bool,
    pub integer: bool,
    /// Searched by the tuner; fixed parameters keep their default.
    pub tuned: bool,
}

const fn axis(name: &'static str, low: f64, high: f64, default: f64, log: bool, integer: bool) -> ParamAxis {
    ParamAxis {
        name,
        low,
        high,
        default,
        log,
        integer,
        tuned: true,
    }
}

pub fn param_space(kind: ClassifierKind) -> Vec<ParamAxis> {
    match kind {
        ClassifierKind::LogisticSgd => vec![
            axis("alpha", 1e-6, 1e-1, 1e-4, true, false),
            axis("eta0", 1e-3, 1.0, 0.1, true, false),
            axis("epochs", 5.0, 50.0, 20.0, false, true),
        ],
        ClassifierKind::GaussianNaiveBayes => vec![axis("var_smoothing", 1e-12, 1e-2, 1e-9, true, false)],
        ClassifierKind::KNearestNeighbors => vec![axis("k", 1.0, 50.0, 15.0, false, true)],
        ClassifierKind::LinearSvm => vec![
            axis("lambda", 1e-6, 1e-1, 1e-4, true, false),
            axis("epochs", 5.0, 50.0, 20.0, false, true),
        ],
        ClassifierKind::RandomForest => vec![
            axis("n_trees", 1.0, 300.0, 100.0, false, true),
            axis("max_depth", 2.0, 16.0, 8.0, false, true),
            axis("max_features", 0.1, 1.0, 0.5, false, false),
            axis("min_samples_leaf", 1.0, 20.0, 1.0, false, true),
            ParamAxis {
                tuned: false,
                ..axis("bootstrap", 0.0, 1.0, 1.0, false, true)
            },
        ],
        ClassifierKind::GradientBoostedTrees => vec![
            axis("n_trees", 1.0, 500.0, 200.0, false, true),
            axis("max_depth", 1.0, 8.0, 3.0, false, true),
            axis("learning_rate", 0.01, 1.0, 0.1, true, false),
            axis("min_samples_leaf", 1.0, 20.0, 1.0, false, true),
            axis("lambda", 0.0, 10.0, 1.0, false, false),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn with_defaults(kind: ClassifierKind, seed: u64) -> Self {
        ClassifierSpec {
            kind,
            hyperparameters: param_space(kind)
                .iter()
                .map(|a| (a.name.to_string(), a.default))
                .collect(),
            seed,
        }
    }

    pub fn set(mut self, name: &str, value: f64) -> Self {
        self.hyperparameters.insert(name.to_string(), value);
        self
    }

    /// Every declared parameter, defaults filled in, all within range.
    pub fn resolved(&self) -> Result<Hyperparameters, MlError> {
        let space = param_space(self.kind);
        let invalid = |name: &str, value: f64| MlError::InvalidHyperparameter {
            kind: self.kind,
            name: name.to_string(),
            value,
        };
        if let Some((name, &v)) = self
            .hyperparameters
            .iter()
            .find(|(n, _)| !space.iter().any(|a| a.name == n.as_str()))
        {
            return Err(invalid(name, v));
        }
        let mut out = Hyperparameters::new();
        for a in &space {
            let v = self.hyperparameters.get(a.name).copied().unwrap_or(a.default);
            if !(v >= a.low && v <= a.high) || (a.integer && v.fract() != 0.0) {
                return Err(invalid(a.name, v));
            }
            out.insert(a.name.to_string(), v);
        }
        Ok(out)
    }

    /// Ordering key for ties: model size first, then every value in name order.
    pub fn complexity(&self) -> Vec<f64> {
        let h = self.resolved().unwrap_or_else(|_| self.hyperparameters.clone());
        let mut key = vec![self
            .kind
            .size_parameter()
            .and_then(|p| h.get(p).copied())
            .unwrap_or(0.0)];
        key.extend(h.values().copied());
        key
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    LogisticSgd {
        scaler: Standardizer,
        weights: Vec<f64>,
        bias: f64,
    },
    GaussianNaiveBayes {
        log_prior: [f64; 2],
        mean: [Vec<f64>; 2],
        var: [Vec<f64>; 2],
    },
    KNearestNeighbors {
        scaler: Standardizer,
        k: usize,
        x: Matrix,
        y: Vec<bool>,
    },
    LinearSvm {
        scaler: Standardizer,
        weights: Vec<f64>,
        bias: f64,
    },
    RandomForest {
        trees: Vec<Tree>,
    },
    GradientBoostedTrees {
        init: f64,
        learning_rate: f64,
        trees: Vec<Tree>,
    },
}

fn sigmoid(z: f64) -> f64 {
    crate::logit::sigmoid(z)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Model {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Model::LogisticSgd { .. } => ClassifierKind::LogisticSgd,
            Model::GaussianNaiveBayes { .. } => ClassifierKind::GaussianNaiveBayes,
            Model::KNearestNeighbors { .. } => ClassifierKind::KNearestNeighbors,
            Model::LinearSvm { .. } => ClassifierKind::LinearSvm,
            Model::RandomForest { .. } => ClassifierKind::RandomForest,
            Model::GradientBoostedTrees { .. } => ClassifierKind::GradientBoostedTrees,
        }
    }

    /// Positive-class score in [0, 1].
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        match self {
            Model::LogisticSgd { scaler, weights, bias } | Model::LinearSvm { scaler, weights, bias } => {
                sigmoid(dot(weights, &scaler.apply(row)) + bias)
            }
            Model::GaussianNaiveBayes { log_prior, mean, var } => {
                let ll = |c: usize| {
                    log_prior[c]
                        + row
                            .iter()
                            .zip(&mean[c])
                            .zip(&var[c])
                            .map(|((x, m), v)| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v))
                            .sum::<f64>()
                };
                sigmoid(ll(1) - ll(0))
            }
            Model::KNearestNeighbors { scaler, k, x, y } => {
                let z = scaler.apply(row);
                let mut d: Vec<(f64, usize)> = x
                    .iter_rows()
                    .enumerate()
                    .map(|(i, r)| (r.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum(), i))
                    .collect();
                let k = (*k).min(d.len());
                let cmp = |p: &(f64, usize), q: &(f64, usize)| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1));
                if k < d.len() {
                    d.select_nth_unstable_by(k - 1, cmp);
                }
                d[..k].iter().filter(|(_, i)| y[*i]).count() as f64 / k as f64
            }
            Model::RandomForest { trees } => trees.iter().map(|t| t.predict(row)).sum::<f64>() / trees.len() as f64,
            Model::GradientBoostedTrees {
                init,
                learning_rate,
                trees,
            } => sigmoid(init + learning_rate * trees.iter().map(|t| t.predict(row)).sum::<f64>()),
        }
    }

    pub fn predict_many(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows())
            .into_par_iter()
            .map(|i| self.predict_proba(x.row(i)))
            .collect()
    }
}

fn sgd_epochs(
    z: &Matrix,
    y: &[bool],
    epochs: usize,
    seed: u64,
    mut step: impl FnMut(&mut [f64], &mut f64, &[f64], f64, u64),
) -> (Vec<f64>, f64) {
    let mut w = vec![0.0; z.cols()];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..z.rows()).collect();
    let mut rng = stream_rng(seed, 0x56D);
    let mut t = 0u64;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            step(&mut w, &mut b, z.row(i), if y[i] { 1.0 } else { 0.0 }, t);
        }
    }
    (w, b)
}

pub fn train(spec: &ClassifierSpec, x: &Matrix, y: &[bool]) -> Result<Model, MlError> {
    check_labels(x, y)?;
    let h = spec.resolved()?;
    let int = |name: &str| h[name] as usize;
    Ok(match spec.kind {
        ClassifierKind::LogisticSgd => {
            let scaler = Standardizer::fit(x);
            let z = scaler.transform(x);
            let (alpha, eta0) = (h["alpha"], h["eta0"]);
            let (weights, bias) = sgd_epochs(&z, y, int("epochs"), spec.seed, |w, b, xi, yi, t| {
                let eta = eta0 / (1.0 + eta0 * alpha * t as f64);
                let g = sigmoid(dot(w, xi) + *b) - yi;
                for (wj, xj) in w.iter_mut().zip(xi) {
                    *wj -= eta * (g * xj + alpha * *wj);
                }
                *b -= eta * g;
            });
            Model::LogisticSgd { scaler, weights, bias }
        }
        ClassifierKind::LinearSvm => {
            let scaler = Standardizer::fit(x);
            let z = scaler.transform(x);
            let lambda = h["lambda"];
            let eta0 = 0.1;
            let (weights, bias) = sgd_epochs(&z, y, int("epochs"), spec.seed, |w, b, xi, yi, t| {
                let eta = eta0 / (1.0 + eta0 * lambda * t as f64);
                let s = 2.0 * yi - 1.0;
                let margin = s * (dot(w, xi) + *b);
                for (wj, xj) in w.iter_mut().zip(xi) {
                    *wj -= eta * lambda * *wj;
                    if margin < 1.0 {
                        *wj += eta * s * xj;
                    }
                }
                if margin < 1.0 {
                    *b += eta * s;
                }
            });
            Model::LinearSvm { scaler, weights, bias }
        }
        ClassifierKind::GaussianNaiveBayes => {
            let p = x.cols();
            let mut mean = [vec![0.0; p], vec![0.0; p]];
            let mut var = [vec![0.0; p], vec![0.0; p]];
            let mut count = [0usize; 2];
            for (r, &label) in x.iter_rows().zip(y) {
                let c = usize::from(label);
                count[c] += 1;
                for (m, v) in mean[c].iter_mut().zip(r) {
                    *m += v;
                }
            }
            for c in 0..2 {
                mean[c].iter_mut().for_each(|m| *m /= count[c] as f64);
            }
            for (r, &label) in x.iter_rows().zip(y) {
                let c = usize::from(label);
                for ((s, v), m) in var[c].iter_mut().zip(r).zip(&mean[c]) {
                    *s += (v - m).powi(2);
                }
            }
            let overall = Standardizer::fit(x);
            let floor = h["var_smoothing"] * overall.sd.iter().map(|s| s * s).fold(0.0, f64::max).max(1e-300);
            for c in 0..2 {
                var[c].iter_mut().for_each(|s| *s = *s / count[c] as f64 + floor);
            }
            let n = y.len() as f64;
            Model::GaussianNaiveBayes {
                log_prior: [(count[0] as f64 / n).ln(), (count[1] as f64 / n).ln()],
                mean,
                var,
            }
        }
        ClassifierKind::KNearestNeighbors => {
            let k = int("k");
            if k > x.rows() {
                return Err(MlError::InvalidHyperparameter {
                    kind: spec.kind,
                    name: "k".into(),
                    value: k as f64,
                });
            }
            let scaler = Standardizer::fit(x);
            Model::KNearestNeighbors {
                x: scaler.transform(x),
                scaler,
                k,
                y: y.to_vec(),
            }
        }
        ClassifierKind::RandomForest => {
            let target: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
            let m = ((h["max_features"] * x.cols() as f64).round() as usize).clamp(1, x.cols());
            let params = TreeParams {
                max_depth: int("max_depth"),
                min_samples_leaf: int("min_samples_leaf"),
                max_features: Some(m),
            };
            let bootstrap = h["bootstrap"] == 1.0;
            let mean = |r: &[usize]| r.iter().map(|&i| target[i]).sum::<f64>() / r.len() as f64;
            let base = Presorted::new(x, &(0..x.rows()).collect::<Vec<_>>());
            let trees = (0..int("n_trees"))
                .into_par_iter()
                .map(|t| {
                    let mut rng = stream_rng(derive_seed(spec.seed, t as u64), 0);
                    let rows = if bootstrap {
                        let mut counts = vec![0u32; x.rows()];
                        for _ in 0..x.rows() {
                            counts[rng.gen_range(0..x.rows())] += 1;
                        }
                        base.with_counts(&counts)
                    } else {
                        base.clone()
                    };
                    fit_presorted(x, rows, &target, &mean, &params, Some(&mut rng))
                })
                .collect();
            Model::RandomForest { trees }
        }
        ClassifierKind::GradientBoostedTrees => {
            let n = y.len();
            let rate = y.iter().filter(|&&v| v).count() as f64 / n as f64;
            let init = (rate / (1.0 - rate)).ln();
            let learning_rate = h["learning_rate"];
            let lambda = h["lambda"];
            let params = TreeParams {
                max_depth: int("max_depth"),
                min_samples_leaf: int("min_samples_leaf"),
                max_features: None,
            };
            let presorted = Presorted::new(x, &(0..n).collect::<Vec<_>>());
            let mut f = vec![init; n];
            let mut trees = Vec::with_capacity(int("n_trees"));
            for _ in 0..int("n_trees") {
                let p: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
                let g: Vec<f64> = (0..n).map(|i| f64::from(y[i]) - p[i]).collect();
                let hess: Vec<f64> = p.iter().map(|q| q * (1.0 - q)).collect();
                let newton = |r: &[usize]| {
                    let sg: f64 = r.iter().map(|&i| g[i]).sum();
                    let sh: f64 = r.iter().map(|&i| hess[i]).sum();
                    sg / (sh + lambda).max(1e-12)
                };
                let tree = fit_presorted(x, presorted.clone(), &g, &newton, &params, None);
                for (i, fi) in f.iter_mut().enumerate() {
                    *fi += learning_rate * tree.predict(x.row(i));
                }
                trees.push(tree);
            }
            Model::GradientBoostedTrees {
                init,
                learning_rate,
                trees,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::auc;
    use crate::ml::testdata::blobs;
    use crate::ml::tree::{best_split, fit_tree};

    #[test]
    fn naive_bayes_separates_blobs() {
        let (x, y) = blobs(400, 3, 5.0, 0.5, 1);
        let m = train(
            &ClassifierSpec::with_defaults(ClassifierKind::GaussianNaiveBayes, 0),
            &x,
            &y,
        )
        .unwrap();
        assert!(auc(&m.predict_many(&x), &y).unwrap() >= 0.99);
    }

    #[test]
    fn boosting_stump_is_the_best_split() {
        let (x, y) = blobs(150, 3, 1.0, 0.4, 2);
        let stump = ClassifierSpec::with_defaults(ClassifierKind::GradientBoostedTrees, 0)
            .set("n_trees", 1.0)
            .set("max_depth", 1.0)
            .set("learning_rate", 1.0);
        let Model::GradientBoostedTrees { trees, .. } = train(&stump, &x, &y).unwrap() else {
            unreachable!()
        };
        let t: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let rows: Vec<usize> = (0..x.rows()).collect();
        let oracle = best_split(&x, &rows, &t, &[0, 1, 2], 1).unwrap();
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].root_split(), Some((oracle.feature, oracle.threshold)));
        assert_eq!(trees[0].leaves(), 2);
    }

    #[test]
    fn identity_bootstrap_forest_is_one_cart() {
        let (x, y) = blobs(200, 4, 1.0, 0.3, 3);
        let single = ClassifierSpec::with_defaults(ClassifierKind::RandomForest, 5)
            .set("n_trees", 1.0)
            .set("max_features", 1.0)
            .set("bootstrap", 0.0)
            .set("max_depth", 5.0);
        let model = train(&single, &x, &y).unwrap();
        let t: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let rows: Vec<usize> = (0..x.rows()).collect();
        let mean = |r: &[usize]| r.iter().map(|&i| t[i]).sum::<f64>() / r.len() as f64;
        let params = TreeParams {
            max_depth: 5,
            min_samples_leaf: 1,
            max_features: None,
        };
        let cart = fit_tree(&x, &rows, &t, &mean, &params, None);
        assert_eq!(
            model,
            Model::RandomForest {
                trees: vec![cart.clone()]
            }
        );
        for r in x.iter_rows() {
            assert_eq!(model.predict_proba(r), cart.predict(r));
        }
    }

    #[test]
    fn invalid_and_degenerate_inputs() {
        let (x, y) = blobs(30, 2, 1.0, 0.5, 4);
        let bad = ClassifierSpec::with_defaults(ClassifierKind::KNearestNeighbors, 0).set("k", 0.0);
        assert!(matches!(
            train(&bad, &x, &y),
            Err(MlError::InvalidHyperparameter { .. })
        ));
        let unknown = ClassifierSpec::with_defaults(ClassifierKind::LinearSvm, 0).set("gamma", 1.0);
        assert!(matches!(
            train(&unknown, &x, &y),
            Err(MlError::InvalidHyperparameter { .. })
        ));
        let frac = ClassifierSpec::with_defaults(ClassifierKind::RandomForest, 0).set("n_trees", 10.5);
        assert!(ClassifierSpec::with_defaults(ClassifierKind::RandomForest, 0)
            .set("n_trees", 0.0)
            .resolved()
            .is_err());
        assert!(matches!(
            train(&frac, &x, &y),
            Err(MlError::InvalidHyperparameter { .. })
        ));
        let one_class = vec![true; 30];
        assert_eq!(
            train(
                &ClassifierSpec::with_defaults(ClassifierKind::GaussianNaiveBayes, 0),
                &x,
                &one_class
            )
            .unwrap_err(),
            MlError::SingleClass
        );
    }

    #[test]
    fn every_kind_is_deterministic_and_serializable() {
        let (x, y) = blobs(150, 3, 2.0, 0.3, 6);
        for kind in ClassifierKind::ALL {
            let spec = ClassifierSpec::with_defaults(kind, 11);
            let a = train(&spec, &x, &y).unwrap();
            let b = train(&spec, &x, &y).unwrap();
            assert_eq!(a, b, "{kind}");
            let scores = a.predict_many(&x);
            assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
            assert!(auc(&scores, &y).unwrap() > 0.9, "{kind}");
            let json = serde_json::to_string(&a).unwrap();
            assert!(json.contains(&format!("\"kind\":\"{kind}\"")));
            let back: Model = serde_json::from_str(&json).unwrap();
            assert_eq!(back.predict_many(&x), scores);
        }
    }

    #[test]
    fn knn_ties_break_towards_lower_index() {
        let x = Matrix::from_rows(&[vec![0.0], vec![2.0], vec![-2.0], vec![5.0], vec![-5.0]]);
        let y = [false, true, false, true, false];
        let m = train(
            &ClassifierSpec::with_defaults(ClassifierKind::KNearestNeighbors, 0).set("k", 2.0),
            &x,
            &y,
        )
        .unwrap();
        // from the origin row 1 and row 2 are equidistant; the nearest two are rows 0 and 1
        assert_eq!(m.predict_proba(&[0.0]), 0.5);
    }
}
