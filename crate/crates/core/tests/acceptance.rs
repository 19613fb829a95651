//! Acceptance criteria, run in order with one PASS/FAIL line each.
//!
//! `cargo test -p proxilink --test acceptance -- --nocapture` shows the lines.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use proxilink::corpus::YearSpan;
use proxilink::explain::{beeswarm_export, exact_shapley, explain_model, sample_background};
use proxilink::features::Feature;
use proxilink::geo::{haversine_km, EarthModel, GeoPoint};
use proxilink::logit::{
    default_distance_grid, design_matrix, effect_pct, elasticity_at, fit_logit, hessian, loglik, response, score,
    tenb_elasticity_curve, LogitConfig, LogitFit,
};
use proxilink::ml::{
    cross_validate, run_protocol, smote, stratified_folds, train, ClassifierKind, ClassifierSpec, Matrix, Origin,
    SmoteConfig, SplitPlan, TunePlan,
};
use proxilink::network::{tenb, CoPubGraph};
use proxilink::pipeline::{run_pipeline, PipelineConfig};
use proxilink::synthetic::{
    cognitive_dominated_pairs, logit_sample, pair_feature_names, separable_pairs, LOGIT_FEATURES,
};
use proxilink::topics::cognitive_distance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (u8, &'static str, fn() -> Check, Option<Duration>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---- 1: great-circle distance ----

const EARTH_KM: f64 = 6373.0;

/// Central angle from unit vectors, `atan2(|u x v|, u . v)`.
fn vector_distance_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let unit = |lat: f64, lon: f64| {
        let (la, lo) = (lat.to_radians(), lon.to_radians());
        [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
    };
    let (u, v) = (unit(lat1, lon1), unit(lat2, lon2));
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let sin = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
    let cos = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    EARTH_KM * sin.atan2(cos)
}

fn criterion_1() -> Check {
    let earth = EarthModel::default();
    ensure!(earth.radius_km == EARTH_KM, "default radius {}", earth.radius_km);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (a, b) = (rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..=180.0));
        let (c, d) = (rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..=180.0));
        let got = haversine_km(
            GeoPoint::from_degrees(a, b).unwrap(),
            GeoPoint::from_degrees(c, d).unwrap(),
            earth,
        );
        let want = vector_distance_km(a, b, c, d);
        let rel = (got - want).abs() / want.max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        ensure!(rel <= 1e-3, "({a}, {b}) to ({c}, {d}): {got} vs {want}");
    }
    for _ in 0..100 {
        let p = GeoPoint::from_degrees(rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..=180.0)).unwrap();
        let d = haversine_km(p, p, earth);
        ensure!(d == 0.0, "p = q gave {d}");
    }
    let antipodes = [
        (0.0, 0.0, 0.0, 180.0),
        (30.0, 20.0, -30.0, -160.0),
        (90.0, 0.0, -90.0, 0.0),
        (45.5, -73.6, -45.5, 106.4),
    ];
    for (a, b, c, d) in antipodes {
        let got = haversine_km(
            GeoPoint::from_degrees(a, b).unwrap(),
            GeoPoint::from_degrees(c, d).unwrap(),
            earth,
        );
        ensure!(
            (got - std::f64::consts::PI * EARTH_KM).abs() <= 1e-6,
            "antipode ({a}, {b}): {got}"
        );
    }
    Ok(format!("worst relative error {worst:.2e}"))
}

// ---- 2: bridging paths ----

fn criterion_2() -> Check {
    let span = YearSpan::new(2000, 2002);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pairs_checked = 0usize;
    for _ in 0..100 {
        let nodes = rng.gen_range(3..=30usize);
        let names: Vec<String> = (0..nodes).map(|i| format!("a{i:02}")).collect();
        let mut graph = CoPubGraph::empty(span);
        let mut pubs: Vec<BTreeSet<usize>> = Vec::new();
        let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        let budget = rng.gen_range(1..=120usize);
        for _ in 0..200 {
            let size = rng.gen_range(1..=4usize).min(nodes);
            let authors: BTreeSet<usize> = (0..size).map(|_| rng.gen_range(0..nodes)).collect();
            let mut grown = edges.clone();
            for &a in &authors {
                for &b in authors.range(a + 1..) {
                    grown.insert((a, b));
                }
            }
            if grown.len() > budget {
                continue;
            }
            edges = grown;
            graph.add_publication(authors.iter().map(|&a| names[a].as_str()));
            pubs.push(authors);
        }
        ensure!(
            graph.edge_count() == edges.len() && edges.len() <= 120,
            "edge count {}",
            graph.edge_count()
        );
        // enumeration straight from the publication list
        let n = |k: usize| pubs.iter().filter(|p| p.contains(&k)).count() as u32;
        let g = |i: usize, k: usize| pubs.iter().filter(|p| p.contains(&i) && p.contains(&k)).count() as u32;
        let present: Vec<usize> = (0..nodes).filter(|&k| n(k) > 0).collect();
        for &i in &present {
            for &j in &present {
                if i == j {
                    continue;
                }
                let mut want = 0.0;
                for &k in &present {
                    if k != i && k != j && g(i, k) > 0 && g(j, k) > 0 {
                        want += g(i, k) as f64 * g(j, k) as f64 / n(k) as f64;
                    }
                }
                let got = tenb(&graph, &names[i], &names[j]);
                ensure!(got == want, "tenb({}, {}) = {got}, oracle {want}", names[i], names[j]);
                pairs_checked += 1;
            }
        }
    }
    Ok(format!("{pairs_checked} ordered pairs"))
}

// ---- 3: cognitive distance bounds ----

fn criterion_3() -> Check {
    let cases: [(&[f64], &[f64], f64); 4] = [
        (&[0.1, 0.2, 0.7], &[0.1, 0.2, 0.7], 0.0),
        (&[0.25, 0.25, 0.125, 0.375], &[0.25, 0.25, 0.125, 0.375], 0.0),
        (&[0.0, 1.0], &[1.0, 0.0], 2.0),
        (&[0.25, 0.75, 0.5], &[0.75, 0.25, 0.5], 2.0),
    ];
    for (a, b, want) in cases {
        let d = cognitive_distance(a, b).map_err(|e| e.to_string())?;
        ensure!(
            !d.degenerate && d.value == want,
            "{a:?} vs {b:?}: {} (want {want})",
            d.value
        );
    }
    Ok("0 and 2 exactly".into())
}

// ---- 4: percentage effects ----

fn criterion_4() -> Check {
    let high = effect_pct(-1.49);
    let low = effect_pct(-0.34);
    ensure!((high - 0.7746).abs() < 5e-5, "effect_pct(-1.49) = {high}");
    ensure!((low - 0.2882).abs() < 5e-5, "effect_pct(-0.34) = {low}");
    ensure!((high - 0.77).abs() <= 0.005, "{high} vs 0.77");
    ensure!((low - 0.29).abs() <= 0.005, "{low} vs 0.29");
    Ok(format!("{high:.4} and {low:.4}"))
}

// ---- 5: coefficient recovery ----

fn criterion_5() -> Check {
    let truth = [-0.5, -0.4, 4.0, 0.4, -2.5];
    let (rows, y) = logit_sample(&truth, 10_000, 5);
    let names: Vec<String> = LOGIT_FEATURES.iter().map(|f| f.name().to_string()).collect();
    let fit = fit_logit(&rows, &y, &names, &LogitConfig::default()).map_err(|e| e.to_string())?;
    ensure!(fit.converged, "IRLS did not converge");
    let mut worst: f64 = 0.0;
    for (k, &b) in truth.iter().enumerate() {
        let dev = (fit.beta[k] - b).abs() / fit.se[k];
        worst = worst.max(dev);
        ensure!(
            dev <= 3.0,
            "{}: {} vs {b} is {dev:.2} SE off",
            fit.names[k],
            fit.beta[k]
        );
        ensure!(
            fit.beta[k].signum() == b.signum(),
            "{}: sign of {}",
            fit.names[k],
            fit.beta[k]
        );
        ensure!(fit.p[k] < 0.01, "{}: p = {}", fit.names[k], fit.p[k]);
    }
    Ok(format!("max deviation {worst:.2} SE"))
}

// ---- 6: derivatives ----

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-9 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn criterion_6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(15..40usize);
        let p = rng.gen_range(1..5usize);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let x: DMatrix<f64> = design_matrix(&rows);
        let yv: DVector<f64> = response(&y);
        let beta = DVector::from_fn(p + 1, |_, _| rng.gen_range(-1.0..1.0));
        let s = score(&x, &yv, &beta);
        let hm = hessian(&x, &beta);
        for j in 0..=p {
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (loglik(&x, &yv, &up) - loglik(&x, &yv, &down)) / (2.0 * h);
            worst = worst.max(rel_err(s[j], fd));
            ensure!(rel_err(s[j], fd) <= 1e-4, "score[{j}] {} vs {fd}", s[j]);
            let col = (score(&x, &yv, &up) - score(&x, &yv, &down)) / (2.0 * h);
            for i in 0..=p {
                worst = worst.max(rel_err(hm[(i, j)], col[i]));
                ensure!(
                    rel_err(hm[(i, j)], col[i]) <= 1e-4,
                    "hessian[{i},{j}] {} vs {}",
                    hm[(i, j)],
                    col[i]
                );
            }
        }
    }
    Ok(format!("worst relative error {worst:.2e}"))
}

// ---- 7: elasticity ----

fn criterion_7() -> Check {
    let (bt, bi) = (4.24, 0.43);
    ensure!(
        elasticity_at(bt, bi, 0.0) == bt,
        "at 0 km: {}",
        elasticity_at(bt, bi, 0.0)
    );
    let fit = LogitFit {
        names: ["intercept", "ln_tenb", "interaction"].map(String::from).to_vec(),
        beta: vec![-1.0, bt, bi],
        se: vec![0.1; 3],
        z: vec![0.0; 3],
        p: vec![0.0; 3],
        loglik: -1.0,
        null_loglik: -2.0,
        pseudo_r2: 0.5,
        bic: 0.0,
        n: 10,
        converged: true,
        iterations: 1,
    };
    let curve = tenb_elasticity_curve(&fit, &default_distance_grid(), None).map_err(|e| e.to_string())?;
    ensure!(
        curve[0].distance_km == 0.0 && curve[0].elasticity == bt,
        "curve starts at {:?}",
        curve[0]
    );
    for w in curve.windows(2) {
        ensure!(
            w[1].elasticity > w[0].elasticity,
            "not increasing at {} km",
            w[1].distance_km
        );
    }
    let mut d = 0.0;
    while d < 20_000.0 {
        ensure!(
            elasticity_at(bt, bi, d + 0.5) > elasticity_at(bt, bi, d),
            "not increasing at {d} km"
        );
        d += 0.5;
    }
    Ok(format!(
        "{:.4} at 0 km to {:.4} at 10,000 km",
        curve[0].elasticity,
        curve.last().unwrap().elasticity
    ))
}

// ---- 8: classifier pattern ----

fn criterion_8() -> Check {
    let (x, y) = separable_pairs(2000, 8);
    let rows: Vec<usize> = (0..x.rows()).collect();
    let plan = SplitPlan {
        folds: 5,
        seed: 8,
        ..SplitPlan::default()
    };
    let folds = stratified_folds(&y, &rows, &plan).map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    for kind in ClassifierKind::ALL {
        let spec = ClassifierSpec::with_defaults(kind, 8);
        let (aucs, _) =
            cross_validate(&spec, &x, &y, &folds, Some(&SmoteConfig::default())).map_err(|e| e.to_string())?;
        let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
        summary.push(format!("{kind} {mean:.4}"));
        let floor = if kind == ClassifierKind::GradientBoostedTrees {
            0.99
        } else {
            0.95
        };
        ensure!(mean >= floor, "{kind}: CV AUC {mean:.4} < {floor}");
    }
    Ok(summary.join(", "))
}

// ---- 9: oversampling hygiene ----

fn criterion_9() -> Check {
    let (x, y) = separable_pairs(600, 9);
    let n = x.rows();
    let split_plan = SplitPlan {
        seed: 9,
        ..SplitPlan::default()
    };
    let tune_plan = TunePlan {
        random_fits: 2,
        max_grid_fits: 2,
        seed: 9,
        ..TunePlan::default()
    };
    let cfg = SmoteConfig::default();
    let report = run_protocol(
        &x,
        &y,
        &[ClassifierKind::LogisticSgd],
        &split_plan,
        &tune_plan,
        Some(&cfg),
    )
    .map_err(|e| e.to_string())?;
    let test: BTreeSet<usize> = report.split.test.iter().copied().collect();
    let train: BTreeSet<usize> = report.split.train.iter().copied().collect();
    ensure!(
        test.is_disjoint(&train) && test.len() + train.len() == n,
        "split is not a partition"
    );
    let fold_union: BTreeSet<usize> = report.folds.iter().flatten().copied().collect();
    ensure!(fold_union == train, "folds do not partition the training rows");
    let (_, records) =
        cross_validate(&report.specs[0], &x, &y, &report.folds, Some(&cfg)).map_err(|e| e.to_string())?;
    let mut synthetic = 0usize;
    for rec in &records {
        let validation: BTreeSet<usize> = rec.validation.iter().copied().collect();
        ensure!(
            validation.iter().all(|&r| r < n),
            "validation row past the original rows"
        );
        for o in &rec.train_origins {
            let used = match *o {
                Origin::Original(r) => vec![r],
                Origin::Synthetic { base, neighbor, .. } => {
                    synthetic += 1;
                    vec![base, neighbor]
                }
            };
            for r in used {
                ensure!(train.contains(&r), "training drew on held-out row {r}");
                ensure!(!validation.contains(&r), "training drew on validation row {r}");
            }
        }
    }
    ensure!(synthetic > 0, "no synthetic rows were generated");

    let out = smote(&x, &y, &cfg, 9).map_err(|e| e.to_string())?;
    let minority = y.iter().filter(|&&v| v).count() * 2 <= n;
    for (r, o) in out.origin.iter().enumerate() {
        let row = out.x.row(r);
        match *o {
            Origin::Original(i) => ensure!(i == r && row == x.row(i) && out.y[r] == y[i], "original row {r} moved"),
            Origin::Synthetic { base, neighbor, u } => {
                ensure!(
                    y[base] == minority && y[neighbor] == minority && out.y[r] == minority,
                    "row {r} mixes classes"
                );
                let (a, b) = (x.row(base), x.row(neighbor));
                let span: f64 = a.iter().zip(b).map(|(p, q)| (q - p).powi(2)).sum();
                let t = if span == 0.0 {
                    0.0
                } else {
                    a.iter()
                        .zip(b)
                        .zip(row)
                        .map(|((p, q), z)| (z - p) * (q - p))
                        .sum::<f64>()
                        / span
                };
                ensure!((-1e-12..=1.0 + 1e-12).contains(&t), "row {r} projects to {t}");
                for ((p, q), z) in a.iter().zip(b).zip(row) {
                    ensure!(
                        (p + t * (q - p) - z).abs() <= 1e-9 * (1.0 + p.abs() + q.abs()),
                        "row {r} is off the segment"
                    );
                }
                ensure!(
                    span == 0.0 || (t - u).abs() <= 1e-9,
                    "row {r}: projected {t}, recorded {u}"
                );
            }
        }
    }
    Ok(format!(
        "{} folds, {synthetic} synthetic training rows traced",
        records.len()
    ))
}

// ---- 10: Shapley values ----

/// Average-over-permutations form with an interventional background.
fn permutation_shapley<M: Fn(&[f64]) -> f64>(model: &M, row: &[f64], background: &[Vec<f64>]) -> Vec<f64> {
    let f = row.len();
    let value = |set: &[bool]| {
        background
            .iter()
            .map(|b| {
                let z: Vec<f64> = (0..f).map(|j| if set[j] { row[j] } else { b[j] }).collect();
                model(&z)
            })
            .sum::<f64>()
            / background.len() as f64
    };
    let mut phi = vec![0.0; f];
    let mut perm: Vec<usize> = (0..f).collect();
    let mut count = 0usize;
    loop {
        let mut set = vec![false; f];
        let mut before = value(&set);
        for &j in &perm {
            set[j] = true;
            let after = value(&set);
            phi[j] += after - before;
            before = after;
        }
        count += 1;
        // next lexicographic permutation
        let Some(i) = (0..f.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
            break;
        };
        let k = (i + 1..f).rev().find(|&k| perm[k] > perm[i]).unwrap();
        perm.swap(i, k);
        perm[i + 1..].reverse();
    }
    phi.iter().map(|p| p / count as f64).collect()
}

fn criterion_10() -> Check {
    let (x, y) = cognitive_dominated_pairs(1500, 10);
    let gbt = train(
        &ClassifierSpec::with_defaults(ClassifierKind::GradientBoostedTrees, 10),
        &x,
        &y,
    )
    .map_err(|e| e.to_string())?;
    let background = sample_background(&x, 64, 10);
    let explained = x.select(&(0..120).collect::<Vec<_>>());
    let explanations = explain_model(&gbt, &explained, &background).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (e, row) in explanations.iter().zip(explained.iter_rows()) {
        ensure!(
            e.model_output == gbt.predict_proba(row),
            "row {}: output differs from the model",
            e.row_id
        );
        let gap = (e.base_value + e.phi.iter().sum::<f64>() - e.model_output).abs();
        worst = worst.max(gap);
        ensure!(gap <= 1e-6, "row {}: efficiency gap {gap:e}", e.row_id);
    }

    // an extra column the model never reads
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let widen = |r: &[f64], rng: &mut ChaCha8Rng| {
        let mut w = r.to_vec();
        w.push(rng.gen_range(-3.0..3.0));
        w
    };
    let wide_background: Vec<Vec<f64>> = background.iter().map(|b| widen(b, &mut rng)).collect();
    let ignores_last = |z: &[f64]| gbt.predict_proba(&z[..7]);
    for r in 0..20 {
        let row = widen(x.row(r), &mut rng);
        let e = exact_shapley(ignores_last, r, &row, &wide_background).map_err(|e| e.to_string())?;
        ensure!(e.phi[7] == 0.0, "row {r}: dummy phi {}", e.phi[7]);
    }

    let mut oracle_gap: f64 = 0.0;
    for f in 2..=5 {
        let (sx, sy) = separable_pairs(400, 100 + f as u64);
        let cols: Vec<Vec<f64>> = sx.iter_rows().map(|r| r[..f].to_vec()).collect();
        let small = Matrix::from_rows(&cols);
        let forest = train(
            &ClassifierSpec::with_defaults(ClassifierKind::RandomForest, 10).set("n_trees", 20.0),
            &small,
            &sy,
        )
        .map_err(|e| e.to_string())?;
        let model = |z: &[f64]| forest.predict_proba(z);
        let bg = sample_background(&small, 16, f as u64);
        for r in 0..10 {
            let row = small.row(r);
            let e = exact_shapley(model, r, row, &bg).map_err(|e| e.to_string())?;
            let oracle = permutation_shapley(&model, row, &bg);
            for (a, b) in e.phi.iter().zip(&oracle) {
                oracle_gap = oracle_gap.max((a - b).abs());
                ensure!((a - b).abs() <= 1e-9, "F = {f}, row {r}: {a} vs permutation {b}");
            }
        }
    }

    let swarm = beeswarm_export(&explanations, &explained, &pair_feature_names()).map_err(|e| e.to_string())?;
    let ranking = swarm.ranking();
    ensure!(ranking[0] == Feature::CogDistance.name(), "ranking {ranking:?}");
    Ok(format!(
        "efficiency gap {worst:.1e}, permutation gap {oracle_gap:.1e}, ranking {}",
        ranking.join(" > ")
    ))
}

// ---- 11: reproducible runs ----

fn bundle(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn criterion_11() -> Check {
    let corpus = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_corpus.jsonl");
    let config = PipelineConfig::synthetic(corpus);
    let mut bundles = Vec::new();
    let start = Instant::now();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let outcome = run_pipeline(&config, dir.path()).map_err(|e| e.to_string())?;
        ensure!(outcome.manifest.complete, "run incomplete");
        bundles.push(bundle(dir.path()));
    }
    let elapsed = start.elapsed();
    let (a, b) = (&bundles[0], &bundles[1]);
    ensure!(
        a.keys().eq(b.keys()),
        "file sets differ: {:?} vs {:?}",
        a.keys(),
        b.keys()
    );
    for (name, bytes) in a {
        ensure!(bytes == &b[name], "{name} differs between runs");
    }
    ensure!(
        elapsed < Duration::from_secs(60),
        "two runs took {:.1} s",
        elapsed.as_secs_f64()
    );
    Ok(format!(
        "{} files identical, two runs in {:.1} s",
        a.len(),
        elapsed.as_secs_f64()
    ))
}

#[test]
fn acceptance_suite() {
    let criteria: [Criterion; 11] = [
        (1, "haversine oracle", criterion_1, Some(Duration::from_secs(1))),
        (
            2,
            "bridging-path enumeration",
            criterion_2,
            Some(Duration::from_secs(5)),
        ),
        (3, "cognitive distance bounds", criterion_3, None),
        (4, "percentage effects", criterion_4, None),
        (5, "logit recovery", criterion_5, Some(Duration::from_secs(30))),
        (6, "score and Hessian", criterion_6, None),
        (7, "elasticity curve", criterion_7, None),
        (8, "classifier AUC pattern", criterion_8, Some(Duration::from_secs(120))),
        (9, "leak-free oversampling", criterion_9, None),
        (10, "Shapley axioms and ranking", criterion_10, None),
        (
            11,
            "end-to-end determinism",
            criterion_11,
            Some(Duration::from_secs(60)),
        ),
    ];
    let mut failed = Vec::new();
    for (id, title, run, budget) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = match (result, budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!(
                "took {:.2} s, budget {:.0} s",
                elapsed.as_secs_f64(),
                b.as_secs_f64()
            )),
            (r, _) => r,
        };
        match &result {
            Ok(detail) => println!(
                "criterion {id:>2} PASS  {title} ({:.2} s): {detail}",
                elapsed.as_secs_f64()
            ),
            Err(why) => {
                println!(
                    "criterion {id:>2} FAIL  {title} ({:.2} s): {why}",
                    elapsed.as_secs_f64()
                );
                failed.push(id);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
