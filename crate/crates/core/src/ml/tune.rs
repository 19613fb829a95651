use std::cmp::Ordering;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    auc, param_space, smote, stratified_folds, stratified_split, train, ClassifierKind, ClassifierSpec,
    Hyperparameters, Matrix, MlError, Model, Origin, SmoteConfig, SplitPlan, TrainTest,
};
use crate::util::{derive_seed, fmt_f64, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TunePlan {
    pub random_fits: usize,
    /// Values per axis in the grid stage, centred on the random-stage winner.
    pub grid_points: usize,
    /// Multiplicative step for log-scaled axes.
    pub grid_factor: f64,
    /// Step for linear axes as a fraction of the axis range.
    pub grid_step: f64,
    /// Grids larger than this are subsampled (the winner is always kept).
    pub max_grid_fits: usize,
    pub seed: u64,
}

impl Default for TunePlan {
    fn default() -> Self {
        TunePlan {
            random_fits: 200,
            grid_points: 3,
            grid_factor: 2.0,
            grid_step: 0.1,
            max_grid_fits: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneLogEntry {
    pub spec_id: usize,
    pub stage: String,
    pub kind: ClassifierKind,
    pub hyperparameters: Hyperparameters,
    pub fold_aucs: Vec<f64>,
    pub mean_auc: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub kind: ClassifierKind,
    pub hyperparameters: Hyperparameters,
    pub fold_aucs: Vec<f64>,
    pub mean_auc: f64,
    pub test_auc: f64,
    /// Not serialized so that reports stay byte-identical across runs.
    #[serde(skip)]
    pub wall_time_ms: f64,
}

/// What one cross-validation fold trained on and was scored on.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRecord {
    /// Indices into the full matrix.
    pub validation: Vec<usize>,
    /// Training rows after rebalancing, with indices into the full matrix.
    pub train_origins: Vec<Origin>,
}

fn fit_rows(
    spec: &ClassifierSpec,
    x: &Matrix,
    y: &[bool],
    rows: &[usize],
    rebalance: Option<&SmoteConfig>,
    seed: u64,
) -> Result<(Model, Vec<Origin>), MlError> {
    let xs = x.select(rows);
    let ys: Vec<bool> = rows.iter().map(|&r| y[r]).collect();
    let (xt, yt, origins) = match rebalance {
        Some(cfg) => {
            let out = smote(&xs, &ys, cfg, seed)?;
            (out.x, out.y, out.origin)
        }
        None => (xs, ys, (0..rows.len()).map(Origin::Original).collect()),
    };
    let global = origins
        .into_iter()
        .map(|o| match o {
            Origin::Original(i) => Origin::Original(rows[i]),
            Origin::Synthetic { base, neighbor, u } => Origin::Synthetic {
                base: rows[base],
                neighbor: rows[neighbor],
                u,
            },
        })
        .collect();
    Ok((train(spec, &xt, &yt)?, global))
}

/// Per-fold AUC; rebalancing touches only the training part of each fold.
pub fn cross_validate(
    spec: &ClassifierSpec,
    x: &Matrix,
    y: &[bool],
    folds: &[Vec<usize>],
    rebalance: Option<&SmoteConfig>,
) -> Result<(Vec<f64>, Vec<FoldRecord>), MlError> {
    let mut aucs = Vec::with_capacity(folds.len());
    let mut records = Vec::with_capacity(folds.len());
    for (f, validation) in folds.iter().enumerate() {
        let train_rows: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, rows)| rows.iter().copied())
            .collect::<Vec<_>>();
        let mut train_rows = train_rows;
        train_rows.sort_unstable();
        let (model, train_origins) = fit_rows(spec, x, y, &train_rows, rebalance, derive_seed(spec.seed, f as u64))?;
        let scores: Vec<f64> = validation.iter().map(|&r| model.predict_proba(x.row(r))).collect();
        let labels: Vec<bool> = validation.iter().map(|&r| y[r]).collect();
        aucs.push(auc(&scores, &labels)?);
        records.push(FoldRecord {
            validation: validation.clone(),
            train_origins,
        });
    }
    Ok((aucs, records))
}

fn sample_spec(kind: ClassifierKind, seed: u64, job: u64) -> ClassifierSpec {
    let mut rng = stream_rng(derive_seed(seed, kind as u64), job);
    let mut spec = ClassifierSpec::with_defaults(kind, seed);
    for a in param_space(kind).into_iter().filter(|a| a.tuned) {
        let v = if a.log {
            rng.gen_range(a.low.ln()..=a.high.ln()).exp()
        } else {
            rng.gen_range(a.low..=a.high)
        };
        let v = if a.integer { v.round() } else { v };
        spec.hyperparameters.insert(a.name.to_string(), v.clamp(a.low, a.high));
    }
    spec
}

fn grid_around(winner: &ClassifierSpec, plan: &TunePlan) -> Vec<ClassifierSpec> {
    let g = plan.grid_points.max(1) as i32;
    let offsets: Vec<i32> = (0..g).map(|k| k - (g - 1) / 2).collect();
    let mut specs = vec![winner.clone()];
    for a in param_space(winner.kind).into_iter().filter(|a| a.tuned) {
        let w = winner.hyperparameters[a.name];
        let mut values: Vec<f64> = offsets
            .iter()
            .map(|&o| {
                let v = if a.log {
                    w * plan.grid_factor.powi(o)
                } else {
                    w + o as f64 * plan.grid_step * (a.high - a.low)
                };
                let v = if a.integer { v.round() } else { v };
                v.clamp(a.low, a.high)
            })
            .collect();
        values.push(w);
        values.sort_by(f64::total_cmp);
        values.dedup();
        specs = specs
            .iter()
            .flat_map(|s| {
                values.iter().map(move |&v| {
                    let mut t = s.clone();
                    t.hyperparameters.insert(a.name.to_string(), v);
                    t
                })
            })
            .collect();
    }
    let key = |s: &ClassifierSpec| s.hyperparameters.values().map(|v| v.to_bits()).collect::<Vec<_>>();
    let mut seen = std::collections::BTreeSet::new();
    specs.retain(|s| seen.insert(key(s)));
    if specs.len() > plan.max_grid_fits.max(1) {
        let wkey = key(winner);
        let mut rng = stream_rng(derive_seed(plan.seed, 0x6E1D), winner.kind as u64);
        let others: Vec<ClassifierSpec> = specs.iter().filter(|s| key(s) != wkey).cloned().collect();
        let keep = index::sample(&mut rng, others.len(), plan.max_grid_fits.max(1) - 1).into_vec();
        let mut chosen: Vec<usize> = keep;
        chosen.sort_unstable();
        specs = std::iter::once(winner.clone())
            .chain(chosen.into_iter().map(|i| others[i].clone()))
            .collect();
    }
    specs
}

fn cmp_complexity(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Index of the best entry: highest mean AUC, then the smaller model, then the earlier spec.
fn pick(entries: &[(ClassifierSpec, Option<f64>)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (spec, score)) in entries.iter().enumerate() {
        let Some(s) = score else { continue };
        best = match best {
            None => Some(i),
            Some(b) => {
                let bs = entries[b].1.unwrap();
                if *s > bs + 1e-12
                    || ((s - bs).abs() <= 1e-12
                        && cmp_complexity(&spec.complexity(), &entries[b].0.complexity()) == Ordering::Less)
                {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

fn evaluate(
    specs: Vec<ClassifierSpec>,
    x: &Matrix,
    y: &[bool],
    folds: &[Vec<usize>],
    rebalance: Option<&SmoteConfig>,
    stage: &str,
    first_id: usize,
) -> Vec<(ClassifierSpec, TuneLogEntry)> {
    specs
        .into_par_iter()
        .enumerate()
        .map(|(k, spec)| {
            let result = cross_validate(&spec, x, y, folds, rebalance);
            let (fold_aucs, mean_auc, error) = match result {
                Ok((aucs, _)) => {
                    let m = aucs.iter().sum::<f64>() / aucs.len() as f64;
                    (aucs, Some(m), None)
                }
                Err(e) => (vec![], None, Some(e.to_string())),
            };
            let entry = TuneLogEntry {
                spec_id: first_id + k,
                stage: stage.to_string(),
                kind: spec.kind,
                hyperparameters: spec.hyperparameters.clone(),
                fold_aucs,
                mean_auc,
                error,
            };
            (spec, entry)
        })
        .collect()
}

/// Random search, then a grid around its winner; the final spec is refit on
/// all training rows and scored once on the test rows.
#[allow(clippy::too_many_arguments)]
pub fn tune(
    kind: ClassifierKind,
    x: &Matrix,
    y: &[bool],
    split: &TrainTest,
    folds: &[Vec<usize>],
    plan: &TunePlan,
    rebalance: Option<&SmoteConfig>,
) -> Result<(ClassifierSpec, EvalResult, Model, Vec<TuneLogEntry>), MlError> {
    if plan.random_fits == 0 {
        return Err(MlError::InvalidPlan("random_fits must be positive".into()));
    }
    let start = Instant::now();
    let random: Vec<ClassifierSpec> = (0..plan.random_fits)
        .map(|j| sample_spec(kind, plan.seed, j as u64))
        .collect();
    let mut log = Vec::new();
    let stage1 = evaluate(random, x, y, folds, rebalance, "random", 0);
    let scored: Vec<(ClassifierSpec, Option<f64>)> = stage1.iter().map(|(s, e)| (s.clone(), e.mean_auc)).collect();
    let w = pick(&scored).ok_or(MlError::AllFitsFailed(kind))?;
    log.extend(stage1.into_iter().map(|(_, e)| e));

    let grid = grid_around(&scored[w].0, plan);
    let stage2 = evaluate(grid, x, y, folds, rebalance, "grid", plan.random_fits);
    let mut all = scored;
    all.extend(stage2.iter().map(|(s, e)| (s.clone(), e.mean_auc)));
    let mut all_entries: Vec<&TuneLogEntry> = log.iter().collect();
    all_entries.extend(stage2.iter().map(|(_, e)| e));
    let best = pick(&all).ok_or(MlError::AllFitsFailed(kind))?;
    let fold_aucs = all_entries[best].fold_aucs.clone();
    let mean_auc = all[best].1.unwrap();
    log.extend(stage2.into_iter().map(|(_, e)| e));

    let spec = all[best].0.clone();
    let (model, _) = fit_rows(&spec, x, y, &split.train, rebalance, derive_seed(spec.seed, 0xF1A1))?;
    let test_scores: Vec<f64> = split.test.iter().map(|&r| model.predict_proba(x.row(r))).collect();
    let test_labels: Vec<bool> = split.test.iter().map(|&r| y[r]).collect();
    let result = EvalResult {
        kind,
        hyperparameters: spec.resolved()?,
        fold_aucs,
        mean_auc,
        test_auc: auc(&test_scores, &test_labels)?,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((spec, result, model, log))
}

#[derive(Debug, Clone)]
pub struct MlReport {
    pub split: TrainTest,
    pub folds: Vec<Vec<usize>>,
    pub results: Vec<EvalResult>,
    pub specs: Vec<ClassifierSpec>,
    pub models: Vec<Model>,
    pub log: Vec<TuneLogEntry>,
}

impl MlReport {
    /// Kind with the best held-out AUC (CV AUC breaks ties, then declaration order).
    pub fn best(&self) -> Option<usize> {
        (0..self.results.len()).reduce(|b, i| {
            let (r, s) = (&self.results[i], &self.results[b]);
            if r.test_auc > s.test_auc || (r.test_auc == s.test_auc && r.mean_auc > s.mean_auc) {
                i
            } else {
                b
            }
        })
    }

    pub fn eval_json(&self) -> String {
        #[derive(Serialize)]
        struct Eval<'a> {
            train_rows: usize,
            test_rows: usize,
            folds: usize,
            best: Option<ClassifierKind>,
            results: &'a [EvalResult],
        }
        serde_json::to_string_pretty(&Eval {
            train_rows: self.split.train.len(),
            test_rows: self.split.test.len(),
            folds: self.folds.len(),
            best: self.best().map(|b| self.results[b].kind),
            results: &self.results,
        })
        .expect("eval serializes")
    }
}

/// Split, fold, then tune every requested kind on the same partitions.
pub fn run_protocol(
    x: &Matrix,
    y: &[bool],
    kinds: &[ClassifierKind],
    split_plan: &SplitPlan,
    plan: &TunePlan,
    rebalance: Option<&SmoteConfig>,
) -> Result<MlReport, MlError> {
    super::check_labels(x, y)?;
    let split = stratified_split(y, split_plan)?;
    let folds = stratified_folds(y, &split.train, split_plan)?;
    let mut report = MlReport {
        split,
        folds,
        results: vec![],
        specs: vec![],
        models: vec![],
        log: vec![],
    };
    for &kind in kinds {
        let (spec, result, model, mut log) = tune(kind, x, y, &report.split, &report.folds, plan, rebalance)?;
        let offset = report.log.len();
        log.iter_mut().for_each(|e| e.spec_id += offset);
        report.log.extend(log);
        report.results.push(result);
        report.specs.push(spec);
        report.models.push(model);
    }
    Ok(report)
}

/// `spec_id,stage,kind,hyperparameters,fold_aucs,mean_auc,error`, with
/// hyperparameters flattened as `name=value;...` and fold AUCs `;`-separated.
pub fn tuning_log_csv(log: &[TuneLogEntry]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "spec_id",
        "stage",
        "kind",
        "hyperparameters",
        "fold_aucs",
        "mean_auc",
        "error",
    ])
    .expect("in-memory write");
    for e in log {
        let mut hp = String::new();
        for (i, (k, v)) in e.hyperparameters.iter().enumerate() {
            if i > 0 {
                hp.push(';');
            }
            write!(hp, "{k}={}", fmt_f64(*v)).unwrap();
        }
        let folds: Vec<String> = e.fold_aucs.iter().map(|&a| fmt_f64(a)).collect();
        w.write_record([
            e.spec_id.to_string(),
            e.stage.clone(),
            e.kind.to_string(),
            hp,
            folds.join(";"),
            e.mean_auc.map(fmt_f64).unwrap_or_default(),
            e.error.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::testdata::{blobs, normal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(x: &Matrix, y: &[bool]) -> (TrainTest, Vec<Vec<usize>>) {
        let plan = SplitPlan::default();
        let split = stratified_split(y, &plan).unwrap();
        let folds = stratified_folds(y, &split.train, &plan).unwrap();
        let _ = x;
        (split, folds)
    }

    #[test]
    fn single_random_fit_wins() {
        let (x, y) = blobs(300, 3, 2.0, 0.3, 1);
        let (split, folds) = setup(&x, &y);
        let plan = TunePlan {
            random_fits: 1,
            grid_points: 1,
            ..Default::default()
        };
        let (spec, result, _, log) =
            tune(ClassifierKind::GaussianNaiveBayes, &x, &y, &split, &folds, &plan, None).unwrap();
        assert_eq!(spec, sample_spec(ClassifierKind::GaussianNaiveBayes, 0, 0));
        assert_eq!(log.len(), 2);
        assert!(log[1].stage == "grid" && log[1].hyperparameters == spec.hyperparameters);
        assert!((0.0..=1.0).contains(&result.test_auc));
    }

    #[test]
    fn grid_contains_the_winner() {
        let w = sample_spec(ClassifierKind::GradientBoostedTrees, 3, 9);
        let g = grid_around(&w, &TunePlan::default());
        assert!(g.contains(&w));
        assert!(g.len() > 50);
        let small = grid_around(
            &w,
            &TunePlan {
                max_grid_fits: 5,
                ..Default::default()
            },
        );
        assert_eq!(small.len(), 5);
        assert_eq!(small[0], w);
    }

    #[test]
    fn ties_go_to_smaller_models() {
        let a = ClassifierSpec::with_defaults(ClassifierKind::KNearestNeighbors, 0).set("k", 9.0);
        let b = ClassifierSpec::with_defaults(ClassifierKind::KNearestNeighbors, 0).set("k", 3.0);
        let c = ClassifierSpec::with_defaults(ClassifierKind::KNearestNeighbors, 0).set("k", 1.0);
        assert_eq!(
            pick(&[(a.clone(), Some(0.9)), (b.clone(), Some(0.9)), (c.clone(), Some(0.8))]),
            Some(1)
        );
        assert_eq!(pick(&[(a, Some(0.9)), (b, None), (c, Some(0.95))]), Some(2));
        assert_eq!(pick(&[]), None);
    }

    #[test]
    fn known_optimal_k_is_selected() {
        // labels depend on the first feature only; the other nine are noise, so
        // a large neighbourhood averages out noise far better than k = 1
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = Matrix::new(10);
        let mut y = Vec::new();
        for _ in 0..400 {
            let row: Vec<f64> = (0..10).map(|_| normal(&mut rng)).collect();
            y.push(row[0] + 0.8 * normal(&mut rng) > 0.0);
            x.push_row(&row);
        }
        let (split, folds) = setup(&x, &y);
        let grid: Vec<ClassifierSpec> = [1.0, 25.0]
            .iter()
            .map(|&k| ClassifierSpec::with_defaults(ClassifierKind::KNearestNeighbors, 0).set("k", k))
            .collect();
        let scored: Vec<(ClassifierSpec, Option<f64>)> = evaluate(grid, &x, &y, &folds, None, "grid", 0)
            .into_iter()
            .map(|(s, e)| (s, e.mean_auc))
            .collect();
        assert_eq!(scored[pick(&scored).unwrap()].0.hyperparameters["k"], 25.0);
        let _ = split;
    }

    #[test]
    fn validation_rows_are_never_synthetic() {
        let (x, y) = blobs(300, 3, 1.0, 0.15, 2);
        let (_, folds) = setup(&x, &y);
        let spec = ClassifierSpec::with_defaults(ClassifierKind::LogisticSgd, 0);
        let (aucs, records) = cross_validate(&spec, &x, &y, &folds, Some(&SmoteConfig::default())).unwrap();
        assert_eq!(aucs.len(), 5);
        for (f, rec) in records.iter().enumerate() {
            assert_eq!(rec.validation, folds[f]);
            for o in &rec.train_origins {
                let touched: Vec<usize> = match *o {
                    Origin::Original(i) => vec![i],
                    Origin::Synthetic { base, neighbor, .. } => vec![base, neighbor],
                };
                assert!(touched.iter().all(|i| !rec.validation.contains(i)));
            }
            assert!(rec.train_origins.iter().any(|o| matches!(o, Origin::Synthetic { .. })));
        }
    }

    #[test]
    fn protocol_is_deterministic() {
        let (x, y) = blobs(200, 3, 1.5, 0.3, 5);
        let plan = TunePlan {
            random_fits: 3,
            grid_points: 3,
            max_grid_fits: 3,
            ..Default::default()
        };
        let kinds = [ClassifierKind::RandomForest, ClassifierKind::LinearSvm];
        let a = run_protocol(
            &x,
            &y,
            &kinds,
            &SplitPlan::default(),
            &plan,
            Some(&SmoteConfig::default()),
        )
        .unwrap();
        let b = run_protocol(
            &x,
            &y,
            &kinds,
            &SplitPlan::default(),
            &plan,
            Some(&SmoteConfig::default()),
        )
        .unwrap();
        assert_eq!(a.eval_json(), b.eval_json());
        assert_eq!(tuning_log_csv(&a.log), tuning_log_csv(&b.log));
        assert_eq!(a.log.len(), 12);
        assert!(!a.eval_json().contains("wall_time"));
    }
}
