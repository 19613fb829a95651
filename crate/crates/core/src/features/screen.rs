use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Dataset, Feature, FeatureError};
use crate::util::{fmt_f64, pearson};

pub const DEFAULT_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationScreen {
    /// `co_publication` followed by the screened features.
    pub names: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    /// Columns with zero variance; their correlations are reported as 0.
    pub zero_variance: Vec<String>,
    pub threshold: f64,
    /// `(dropped, kept, r)` in the order the decisions were made.
    pub excluded: Vec<(Feature, Feature, f64)>,
    pub retained: Vec<Feature>,
}

/// Pearson matrix over the outcome and `features`, dropping the later of any
/// two features whose |r| exceeds `threshold`. The interaction column is
/// exempt because it is built from two other columns.
pub fn correlation_screen(
    ds: &Dataset,
    features: &[Feature],
    threshold: f64,
) -> Result<CorrelationScreen, FeatureError> {
    if ds.rows.len() < 2 {
        return Err(FeatureError::TooFewRows {
            needed: 2,
            got: ds.rows.len(),
        });
    }
    let mut ordered = features.to_vec();
    ordered.sort();
    ordered.dedup();
    let mut cols = vec![ds.labels().into_iter().map(f64::from).collect::<Vec<_>>()];
    for &f in &ordered {
        cols.push(ds.column(f)?);
    }
    let mut names = vec!["co_publication".to_string()];
    names.extend(ordered.iter().map(|f| f.name().to_string()));
    let p = cols.len();
    let mut matrix = vec![vec![0.0; p]; p];
    let mut zero_variance = Vec::new();
    for a in 0..p {
        let constant = cols[a].iter().all(|&x| x == cols[a][0]);
        if constant {
            zero_variance.push(names[a].clone());
        } else {
            matrix[a][a] = 1.0;
        }
        for b in 0..a {
            let r = pearson(&cols[a], &cols[b]).unwrap_or(0.0);
            matrix[a][b] = r;
            matrix[b][a] = r;
        }
    }
    let mut excluded = Vec::new();
    let mut retained: Vec<Feature> = Vec::new();
    'outer: for (fj, &later) in ordered.iter().enumerate() {
        if later != Feature::Interaction {
            for &earlier in &retained {
                if earlier == Feature::Interaction {
                    continue;
                }
                let fi = ordered.iter().position(|&f| f == earlier).unwrap();
                let r = matrix[fj + 1][fi + 1];
                if r.abs() > threshold {
                    excluded.push((later, earlier, r));
                    continue 'outer;
                }
            }
        }
        retained.push(later);
    }
    Ok(CorrelationScreen {
        names,
        matrix,
        zero_variance,
        threshold,
        excluded,
        retained,
    })
}

impl CorrelationScreen {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), FeatureError> {
        let err = |e: csv::Error| FeatureError::Csv(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![String::new()];
        header.extend(self.names.iter().cloned());
        out.write_record(&header).map_err(err)?;
        for (name, row) in self.names.iter().zip(&self.matrix) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|&r| fmt_f64(r)));
            out.write_record(&rec).map_err(err)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ScenarioId;
    use crate::features::{Binaries, DatasetManifest, PairObservation};
    use crate::network::SamplingPolicy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(rows: Vec<PairObservation>, scenario: ScenarioId) -> Dataset {
        Dataset {
            scenario,
            rows,
            manifest: DatasetManifest {
                scenario,
                windows: vec![],
                sampling: SamplingPolicy::All,
                seed: 0,
                earth_radius_km: 6373.0,
                reports: vec![],
                skipped_windows: vec![],
            },
        }
    }

    /// Two-pass correlation on centred data, kept apart from the library helper.
    fn oracle_corr(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0);
        let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        cov / (sx * sy)
    }

    fn random_rows(n: usize, seed: u64, continent_from_distance: bool) -> Vec<PairObservation> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let far = rng.gen_bool(0.3);
                let d = if far {
                    rng.gen_range(5000.0..12000.0)
                } else {
                    rng.gen_range(0.0..300.0)
                };
                let b = Binaries {
                    different_country: Some(rng.gen_bool(0.5)),
                    not_contiguous: rng.gen_bool(0.5),
                    different_continent: Some(if continent_from_distance {
                        far
                    } else {
                        rng.gen_bool(0.5)
                    }),
                    ..Default::default()
                };
                PairObservation::from_raw(
                    "a",
                    "b",
                    0,
                    rng.gen_bool(0.1),
                    d,
                    rng.gen_range(0.0..3.0),
                    rng.gen_range(0.0..2.0),
                    b,
                )
            })
            .collect()
    }

    #[test]
    fn duplicated_information_is_excluded() {
        // different_country and not_contiguous carry the same bit
        let rows: Vec<_> = (0..50)
            .map(|k| {
                let x = k % 3 == 0;
                let b = Binaries {
                    different_country: Some(x),
                    not_contiguous: x,
                    different_continent: Some(k % 2 == 0),
                    ..Default::default()
                };
                PairObservation::from_raw(
                    "a",
                    "b",
                    0,
                    k % 5 == 0,
                    k as f64,
                    (k % 7) as f64,
                    0.5 + (k % 4) as f64 / 10.0,
                    b,
                )
            })
            .collect();
        let ds = dataset(rows, ScenarioId::World);
        let s = correlation_screen(&ds, &Feature::schema(ScenarioId::World), 0.8).unwrap();
        assert!(s.excluded.iter().any(|&(d, k, r)| d == Feature::NotContiguous
            && k == Feature::DifferentCountry
            && (r - 1.0).abs() < 1e-12));
        assert!(!s.retained.contains(&Feature::NotContiguous));
        assert!(s.retained.contains(&Feature::Interaction));
    }

    #[test]
    fn independent_columns_are_nearly_uncorrelated() {
        let ds = dataset(random_rows(10_000, 11, false), ScenarioId::World);
        let feats = [Feature::CogDistance, Feature::DifferentCountry, Feature::NotContiguous];
        let s = correlation_screen(&ds, &feats, 0.8).unwrap();
        for a in 1..s.names.len() {
            for b in 1..a {
                assert!(s.matrix[a][b].abs() < 0.05, "{} {}", s.names[a], s.names[b]);
            }
        }
        let x = ds.column(Feature::CogDistance).unwrap();
        let y = ds.column(Feature::NotContiguous).unwrap();
        assert!((s.matrix[1][3] - oracle_corr(&x, &y)).abs() < 1e-12);
        assert!(s.excluded.is_empty());
    }

    #[test]
    fn continent_falls_to_distance() {
        let ds = dataset(random_rows(2000, 5, true), ScenarioId::NorthAmericaEurope);
        let s = correlation_screen(&ds, &Feature::schema(ScenarioId::NorthAmericaEurope), 0.8).unwrap();
        let (dropped, kept, r) = s.excluded[0];
        assert_eq!((dropped, kept), (Feature::DifferentContinent, Feature::LnGeo));
        assert!(r > 0.8);
    }

    #[test]
    fn matrix_shape_and_zero_variance() {
        let rows: Vec<_> = (0..10)
            .map(|k| {
                let b = Binaries {
                    different_province: Some(k % 2 == 0),
                    ..Default::default()
                };
                PairObservation::from_raw("a", "b", 0, k < 3, k as f64, 0.0, 1.0, b)
            })
            .collect();
        let ds = dataset(rows, ScenarioId::Canada);
        let s = correlation_screen(&ds, &Feature::schema(ScenarioId::Canada), 0.8).unwrap();
        for a in 0..s.names.len() {
            for b in 0..s.names.len() {
                assert_eq!(s.matrix[a][b], s.matrix[b][a]);
            }
        }
        assert_eq!(s.matrix[0][0], 1.0);
        assert!(s.zero_variance.contains(&"ln_tenb".to_string()));
        let i = s.names.iter().position(|n| n == "ln_tenb").unwrap();
        assert!(s.matrix[i].iter().all(|&r| r == 0.0));
        assert!(matches!(
            correlation_screen(&dataset(vec![], ScenarioId::Canada), &[Feature::LnGeo], 0.8),
            Err(FeatureError::TooFewRows { .. })
        ));
    }
}
