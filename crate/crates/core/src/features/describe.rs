use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureError, PairObservation};
use crate::util::fmt_f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub variable: String,
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub n: usize,
    pub positives: usize,
    pub overall: Vec<Summary>,
    /// The same summaries over rows with `co_publication = 1`.
    pub collaborations: Vec<Summary>,
    pub minority_share: f64,
    /// Share of collaborating pairs in different countries; absent when the
    /// scenario has no country column.
    pub cross_country_share: Option<f64>,
}

/// Linear-interpolation quantile of sorted data (`h = (n - 1) p`).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

fn summarize(variable: &str, values: &mut [f64]) -> Summary {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Summary {
        variable: variable.to_string(),
        n,
        mean: if n == 0 {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / n as f64
        },
        min: values.first().copied().unwrap_or(f64::NAN),
        q25: quantile(values, 0.25),
        median: quantile(values, 0.5),
        q75: quantile(values, 0.75),
        max: values.last().copied().unwrap_or(f64::NAN),
    }
}

type Getter = fn(&PairObservation) -> Option<f64>;

const VARIABLES: [(&str, Getter); 8] = [
    ("geo_distance_km", |r| Some(r.geo_distance_km)),
    ("tenb", |r| Some(r.tenb)),
    ("cog_distance", |r| Some(r.cog_distance)),
    ("different_province", |r| r.different_province.map(f64::from)),
    ("different_country", |r| r.different_country.map(f64::from)),
    ("not_contiguous", |r| Some(f64::from(r.not_contiguous))),
    ("different_continent", |r| r.different_continent.map(f64::from)),
    ("co_publication", |r| Some(f64::from(r.co_publication))),
];

fn summaries<'a>(rows: impl Iterator<Item = &'a PairObservation> + Clone) -> Vec<Summary> {
    VARIABLES
        .iter()
        .filter_map(|(name, get)| {
            let mut vals: Vec<f64> = rows.clone().filter_map(get).collect();
            (!vals.is_empty()).then(|| summarize(name, &mut vals))
        })
        .collect()
}

pub fn describe(ds: &Dataset) -> Result<Description, FeatureError> {
    if ds.rows.is_empty() {
        return Err(FeatureError::Empty);
    }
    let positives: Vec<&PairObservation> = ds.rows.iter().filter(|r| r.co_publication).collect();
    let cross_country_share = if positives.is_empty() {
        None
    } else {
        let flags: Option<Vec<bool>> = positives.iter().map(|r| r.different_country).collect();
        flags.map(|f| f.iter().filter(|&&x| x).count() as f64 / f.len() as f64)
    };
    Ok(Description {
        n: ds.rows.len(),
        positives: positives.len(),
        overall: summaries(ds.rows.iter()),
        collaborations: summaries(positives.iter().copied()),
        minority_share: positives.len() as f64 / ds.rows.len() as f64,
        cross_country_share,
    })
}

pub fn write_describe_csv<W: Write>(d: &Description, w: W) -> Result<(), FeatureError> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| FeatureError::Csv(e.to_string());
    out.write_record(["variable", "subset", "n", "mean", "min", "q25", "median", "q75", "max"])
        .map_err(err)?;
    for (subset, list) in [("all", &d.overall), ("collaborations", &d.collaborations)] {
        for s in list {
            let mut rec = vec![s.variable.clone(), subset.to_string(), s.n.to_string()];
            rec.extend([s.mean, s.min, s.q25, s.median, s.q75, s.max].map(fmt_f64));
            out.write_record(&rec).map_err(err)?;
        }
    }
    let extra = [
        ("minority_share", Some(d.minority_share)),
        ("cross_country_share", d.cross_country_share),
    ];
    for (name, v) in extra {
        if let Some(v) = v {
            let mut rec = vec![name.to_string(), "all".to_string(), d.n.to_string(), fmt_f64(v)];
            rec.extend(std::iter::repeat_n(String::new(), 5));
            out.write_record(&rec).map_err(err)?;
        }
    }
    out.flush()?;
    Ok(())
}
