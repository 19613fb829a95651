//! Sliding windows, per-window co-publication graphs, TENB and candidate pairs.

mod graph;
mod pairs;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::{build_graph, tenb, CoPubGraph, GraphDump};
pub use pairs::{candidate_pairs, outcome_label, CandidatePair, CandidateSet, SamplingPolicy};

use crate::corpus::YearSpan;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("year range {range} is shorter than the {needed} years one window pair needs")]
    RangeTooShort { range: YearSpan, needed: i32 },
    #[error("window stride must be at least one year")]
    ZeroStride,
    #[error("no author is active in both {feature} and {outcome}")]
    NoEligibleAuthors { feature: YearSpan, outcome: YearSpan },
}

/// Feature window followed by the outcome window it predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WindowPair {
    pub id: usize,
    pub feature: YearSpan,
    pub outcome: YearSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub feature_years: i32,
    pub outcome_years: i32,
    /// Years skipped between the end of the feature window and the outcome window.
    pub gap_years: i32,
    pub stride: i32,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            feature_years: 3,
            outcome_years: 2,
            gap_years: 0,
            stride: 1,
        }
    }
}

pub fn make_windows(range: YearSpan, config: &WindowConfig) -> Result<Vec<WindowPair>, NetworkError> {
    if config.stride < 1 {
        return Err(NetworkError::ZeroStride);
    }
    let needed = config.feature_years + config.gap_years + config.outcome_years;
    if range.len() < needed {
        return Err(NetworkError::RangeTooShort { range, needed });
    }
    let mut out = Vec::new();
    let mut start = range.start;
    while start + needed - 1 <= range.end {
        let feature = YearSpan::new(start, start + config.feature_years - 1);
        let outcome_start = feature.end + 1 + config.gap_years;
        out.push(WindowPair {
            id: out.len(),
            feature,
            outcome: YearSpan::new(outcome_start, outcome_start + config.outcome_years - 1),
        });
        start += config.stride;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_range_yields_sixteen_pairs() {
        let w = make_windows(YearSpan::new(2000, 2019), &WindowConfig::default()).unwrap();
        assert_eq!(w.len(), 16);
        assert_eq!(
            (w[0].feature, w[0].outcome),
            (YearSpan::new(2000, 2002), YearSpan::new(2003, 2004))
        );
        let last = w.last().unwrap();
        assert_eq!(
            (last.feature, last.outcome),
            (YearSpan::new(2015, 2017), YearSpan::new(2018, 2019))
        );
        for (k, p) in w.iter().enumerate() {
            assert_eq!(p.id, k);
            assert_eq!(p.outcome.start, p.feature.end + 1);
            assert_eq!((p.feature.len(), p.outcome.len()), (3, 2));
            assert!(!p.feature.overlaps(&p.outcome));
        }
    }

    #[test]
    fn minimal_and_short_ranges() {
        assert_eq!(
            make_windows(YearSpan::new(2000, 2004), &WindowConfig::default())
                .unwrap()
                .len(),
            1
        );
        assert!(matches!(
            make_windows(YearSpan::new(2000, 2003), &WindowConfig::default()),
            Err(NetworkError::RangeTooShort { needed: 5, .. })
        ));
    }

    #[test]
    fn stride_and_gap() {
        let cfg = WindowConfig {
            stride: 2,
            gap_years: 1,
            ..Default::default()
        };
        let w = make_windows(YearSpan::new(2000, 2009), &cfg).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[1].feature.start, 2002);
        assert_eq!(w[0].outcome, YearSpan::new(2004, 2005));
        let zero = WindowConfig {
            stride: 0,
            ..Default::default()
        };
        assert_eq!(
            make_windows(YearSpan::new(2000, 2009), &zero),
            Err(NetworkError::ZeroStride)
        );
    }
}
