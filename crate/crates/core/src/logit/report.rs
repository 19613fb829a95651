use std::fmt::Write as _;

use super::{ElasticityPoint, LogitFit};
use crate::util::fmt_f64;

/// `***` below 1%, `**` below 5%, `*` below 10%.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Coefficient table: estimate with stars, standard error in parentheses,
/// then N, pseudo-R² and BIC. Values are printed at full precision.
pub fn logit_table(fit: &LogitFit, title: &str) -> String {
    let width = fit.names.iter().map(String::len).max().unwrap_or(0).max(10);
    let mut s = String::new();
    writeln!(s, "{title}").unwrap();
    writeln!(s, "{:width$}  coefficient (se)", "variable").unwrap();
    for k in 0..fit.names.len() {
        writeln!(s, "{:width$}  {}{}", fit.names[k], fit.beta[k], stars(fit.p[k])).unwrap();
        writeln!(s, "{:width$}  ({})", "", fit.se[k]).unwrap();
    }
    writeln!(s, "{:width$}  {}", "N", fit.n).unwrap();
    writeln!(s, "{:width$}  {}", "pseudo_r2", fit.pseudo_r2).unwrap();
    writeln!(s, "{:width$}  {}", "BIC", fit.bic).unwrap();
    writeln!(s, "{:width$}  {}", "converged", fit.converged).unwrap();
    writeln!(s, "*** p<0.01, ** p<0.05, * p<0.1").unwrap();
    s
}

pub fn elasticity_csv(curve: &[ElasticityPoint]) -> String {
    let with_p = curve.iter().any(|p| p.probability_elasticity.is_some());
    let mut s = String::from(if with_p {
        "distance_km,elasticity,probability_elasticity\n"
    } else {
        "distance_km,elasticity\n"
    });
    for p in curve {
        write!(s, "{},{}", fmt_f64(p.distance_km), fmt_f64(p.elasticity)).unwrap();
        if let Some(pe) = p.probability_elasticity {
            write!(s, ",{}", fmt_f64(pe)).unwrap();
        }
        s.push('\n');
    }
    s
}

/// Inverse of [`elasticity_csv`].
pub fn parse_elasticity_csv(text: &str) -> Result<Vec<ElasticityPoint>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty elasticity file")?;
    let with_p = match header {
        "distance_km,elasticity" => false,
        "distance_km,elasticity,probability_elasticity" => true,
        other => return Err(format!("unexpected header `{other}`")),
    };
    lines
        .enumerate()
        .map(|(i, line)| {
            let v: Vec<f64> = line
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2)))
                .collect::<Result<_, _>>()?;
            if v.len() != 2 + usize::from(with_p) {
                return Err(format!("line {}: expected {} columns", i + 2, 2 + usize::from(with_p)));
            }
            Ok(ElasticityPoint {
                distance_km: v[0],
                elasticity: v[1],
                probability_elasticity: with_p.then(|| v[2]),
            })
        })
        .collect()
}
