use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::MlError;
use crate::util::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitPlan {
    pub train_fraction: f64,
    pub folds: usize,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            train_fraction: 0.9,
            folds: 5,
            stratified: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainTest {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn class_indices(y: &[bool], class: bool, seed: u64, stream: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
    idx.shuffle(&mut stream_rng(seed, stream));
    idx
}

fn both_classes(y: &[bool]) -> Result<(), MlError> {
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(MlError::SingleClass);
    }
    Ok(())
}

/// Holds out `round(n_c * (1 - train_fraction))` rows of each class.
pub fn stratified_split(y: &[bool], plan: &SplitPlan) -> Result<TrainTest, MlError> {
    both_classes(y)?;
    if !(0.0 < plan.train_fraction && plan.train_fraction < 1.0) {
        return Err(MlError::InvalidPlan(format!("train_fraction {}", plan.train_fraction)));
    }
    let groups: Vec<Vec<usize>> = if plan.stratified {
        vec![
            class_indices(y, false, plan.seed, 0),
            class_indices(y, true, plan.seed, 1),
        ]
    } else {
        let mut all: Vec<usize> = (0..y.len()).collect();
        all.shuffle(&mut stream_rng(plan.seed, 2));
        vec![all]
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for g in groups {
        let n_test = (g.len() as f64 * (1.0 - plan.train_fraction)).round() as usize;
        test.extend_from_slice(&g[..n_test]);
        train.extend_from_slice(&g[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(TrainTest { train, test })
}

/// Partitions `rows` (indices into `y`) into `plan.folds` validation folds,
/// dealing each shuffled class round-robin.
pub fn stratified_folds(y: &[bool], rows: &[usize], plan: &SplitPlan) -> Result<Vec<Vec<usize>>, MlError> {
    let k = plan.folds;
    if k < 2 {
        return Err(MlError::InvalidPlan(format!("{k} folds")));
    }
    let sub: Vec<bool> = rows.iter().map(|&r| y[r]).collect();
    both_classes(&sub)?;
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for (stream, class) in [(3, false), (4, true)] {
        let members = class_indices(&sub, class, plan.seed, stream);
        if plan.stratified && members.len() < k {
            return Err(MlError::ClassSmallerThanFolds {
                class,
                count: members.len(),
                folds: k,
            });
        }
        for m in members {
            folds[slot % k].push(rows[m]);
            slot += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n: usize, pos: usize) -> Vec<bool> {
        (0..n).map(|i| i % (n / pos) == 0 && i / (n / pos) < pos).collect()
    }

    #[test]
    fn ninety_ten_split_keeps_one_positive() {
        let y = labels(100, 10);
        assert_eq!(y.iter().filter(|&&v| v).count(), 10);
        let tt = stratified_split(&y, &SplitPlan::default()).unwrap();
        assert_eq!(tt.test.len(), 10);
        assert_eq!(tt.test.iter().filter(|&&i| y[i]).count(), 1);
        assert_eq!(tt, stratified_split(&y, &SplitPlan::default()).unwrap());
    }

    #[test]
    fn too_few_for_folds() {
        let y = labels(100, 3);
        let rows: Vec<usize> = (0..100).collect();
        assert_eq!(
            stratified_folds(&y, &rows, &SplitPlan::default()).unwrap_err(),
            MlError::ClassSmallerThanFolds {
                class: true,
                count: 3,
                folds: 5
            }
        );
        assert_eq!(
            stratified_split(&[true; 4], &SplitPlan::default()).unwrap_err(),
            MlError::SingleClass
        );
    }

    proptest! {
        #[test]
        fn split_and_folds_partition(n in 40usize..300, pos_share in 0.1f64..0.5, seed in 0u64..1000) {
            let y: Vec<bool> = (0..n).map(|i| (i as f64 * pos_share).fract() + pos_share >= 1.0).collect();
            prop_assume!(y.iter().filter(|&&v| v).count() >= 6);
            let plan = SplitPlan { seed, ..Default::default() };
            let tt = stratified_split(&y, &plan).unwrap();
            let mut all: Vec<usize> = tt.train.iter().chain(&tt.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let folds = stratified_folds(&y, &tt.train, &plan).unwrap();
            let mut joined: Vec<usize> = folds.concat();
            joined.sort_unstable();
            prop_assert_eq!(&joined, &tt.train);
            let pos_total = tt.train.iter().filter(|&&i| y[i]).count() as f64;
            let share = tt.train.len() as f64 / plan.folds as f64;
            for f in &folds {
                let got = f.iter().filter(|&&i| y[i]).count() as f64;
                prop_assert!((got - pos_total / plan.folds as f64).abs() < 1.0);
                prop_assert!((f.len() as f64 - share).abs() <= 1.0);
            }
        }
    }
}
