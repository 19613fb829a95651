use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features drawn per node; `None` uses all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 6,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Reduction in the sum of squared errors.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary regression tree; rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first()? {
            Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Row indices ordered by each feature's value, ties by row index.
#[derive(Debug, Clone)]
pub struct Presorted {
    rows: Vec<usize>,
    by_feature: Vec<Vec<usize>>,
}

impl Presorted {
    pub fn new(x: &Matrix, rows: &[usize]) -> Self {
        let by_feature = (0..x.cols())
            .map(|f| {
                let mut v = rows.to_vec();
                v.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
                v
            })
            .collect();
        Presorted {
            rows: rows.to_vec(),
            by_feature,
        }
    }

    /// The same orders for a multiset of rows, `counts[i]` copies of row `i`.
    pub fn with_counts(&self, counts: &[u32]) -> Presorted {
        let expand = |v: &[usize]| -> Vec<usize> {
            v.iter()
                .flat_map(|&i| std::iter::repeat_n(i, counts[i] as usize))
                .collect()
        };
        Presorted {
            rows: expand(&self.rows),
            by_feature: self.by_feature.iter().map(|v| expand(v)).collect(),
        }
    }

    /// Stable in-place partition of `range` in every list; returns the left size.
    fn partition(&mut self, range: std::ops::Range<usize>, left: &[bool], scratch: &mut Vec<usize>) -> usize {
        let mut split = |v: &mut [usize]| {
            scratch.clear();
            let mut k = 0;
            for t in 0..v.len() {
                let i = v[t];
                if left[i] {
                    v[k] = i;
                    k += 1;
                } else {
                    scratch.push(i);
                }
            }
            v[k..].copy_from_slice(scratch);
            k
        };
        let k = split(&mut self.rows[range.clone()]);
        for v in &mut self.by_feature {
            split(&mut v[range.clone()]);
        }
        k
    }
}

fn search(
    x: &Matrix,
    node: &Presorted,
    range: std::ops::Range<usize>,
    target: &[f64],
    features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let n = range.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = node.rows[range.clone()].iter().map(|&r| target[r]).sum();
    let base = total * total / n as f64;
    let mut best: Option<Split> = None;
    for &f in features {
        let sorted = &node.by_feature[f][range.clone()];
        let mut left_sum = 0.0;
        for t in 1..n {
            left_sum += target[sorted[t - 1]];
            if t < min_leaf || n - t < min_leaf {
                continue;
            }
            let (lo, hi) = (x.get(sorted[t - 1], f), x.get(sorted[t], f));
            if lo == hi {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / t as f64 + right_sum * right_sum / (n - t) as f64 - base;
            if gain > best.map_or(1e-12, |b| b.gain) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

/// Exhaustive search for the SSE-optimal split of `target` over `rows`.
/// Ties go to the lower feature index, then the lower threshold.
pub fn best_split(x: &Matrix, rows: &[usize], target: &[f64], features: &[usize], min_leaf: usize) -> Option<Split> {
    search(x, &Presorted::new(x, rows), 0..rows.len(), target, features, min_leaf)
}

/// Grows a tree on `rows` by recursive SSE splits of `target`; `leaf` maps the
/// rows reaching a leaf to its value. `rng` drives per-node feature sampling.
pub fn fit_tree(
    x: &Matrix,
    rows: &[usize],
    target: &[f64],
    leaf: &dyn Fn(&[usize]) -> f64,
    params: &TreeParams,
    rng: Option<&mut ChaCha8Rng>,
) -> Tree {
    fit_presorted(x, Presorted::new(x, rows), target, leaf, params, rng)
}

/// [`fit_tree`] for callers that reuse one presort across many trees.
pub fn fit_presorted(
    x: &Matrix,
    root: Presorted,
    target: &[f64],
    leaf: &dyn Fn(&[usize]) -> f64,
    params: &TreeParams,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Tree {
    let mut tree = Tree { nodes: Vec::new() };
    let all: Vec<usize> = (0..x.cols()).collect();
    let mut left = vec![false; x.rows()];
    let mut scratch = Vec::new();
    let mut work = root;
    // (node slot, row range in `work`, depth)
    let mut stack = vec![(0usize, 0..work.rows.len(), 0usize)];
    tree.nodes.push(Node::Leaf { value: 0.0 });
    while let Some((slot, range, depth)) = stack.pop() {
        let features = match (params.max_features, rng.as_deref_mut()) {
            (Some(m), Some(r)) if m < x.cols() => {
                let mut f = index::sample(r, x.cols(), m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => all.clone(),
        };
        let split = if depth < params.max_depth {
            search(x, &work, range.clone(), target, &features, params.min_samples_leaf)
        } else {
            None
        };
        match split {
            None => {
                tree.nodes[slot] = Node::Leaf {
                    value: leaf(&work.rows[range]),
                }
            }
            Some(s) => {
                for &i in &work.rows[range.clone()] {
                    left[i] = x.get(i, s.feature) <= s.threshold;
                }
                let mid = range.start + work.partition(range.clone(), &left, &mut scratch);
                let (li, ri) = (tree.nodes.len(), tree.nodes.len() + 1);
                tree.nodes.push(Node::Leaf { value: 0.0 });
                tree.nodes.push(Node::Leaf { value: 0.0 });
                tree.nodes[slot] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: li,
                    right: ri,
                };
                stack.push((ri, mid..range.end, depth + 1));
                stack.push((li, range.start..mid, depth + 1));
            }
        }
    }
    tree
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::testdata::blobs;
    use proptest::prelude::*;

    /// Tries every midpoint of every feature and scores it by explicit SSE.
    fn brute_force(x: &Matrix, y: &[f64]) -> (usize, f64, f64) {
        let sse = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|a| (a - m).powi(2)).sum::<f64>()
        };
        let mut best = (usize::MAX, 0.0, f64::INFINITY);
        for f in 0..x.cols() {
            let mut vals: Vec<f64> = (0..x.rows()).map(|i| x.get(i, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let l: Vec<f64> = (0..x.rows()).filter(|&i| x.get(i, f) <= t).map(|i| y[i]).collect();
                let r: Vec<f64> = (0..x.rows()).filter(|&i| x.get(i, f) > t).map(|i| y[i]).collect();
                let total = sse(&l) + sse(&r);
                if total < best.2 - 1e-9 {
                    best = (f, t, total);
                }
            }
        }
        best
    }

    #[test]
    fn stump_matches_brute_force() {
        let (x, y) = blobs(120, 3, 1.5, 0.4, 5);
        let t: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let rows: Vec<usize> = (0..x.rows()).collect();
        let s = best_split(&x, &rows, &t, &[0, 1, 2], 1).unwrap();
        let (f, thr, _) = brute_force(&x, &t);
        assert_eq!((s.feature, s.threshold), (f, thr));
    }

    #[test]
    fn ties_prefer_lower_feature_and_threshold() {
        // columns 0 and 1 identical; two equally good thresholds on column 2 do not beat them
        let x = Matrix::from_rows(&[
            vec![0.0, 0.0, 5.0],
            vec![1.0, 1.0, 5.0],
            vec![2.0, 2.0, 5.0],
            vec![3.0, 3.0, 5.0],
        ]);
        let y = [0.0, 0.0, 1.0, 1.0];
        let s = best_split(&x, &[0, 1, 2, 3], &y, &[0, 1, 2], 1).unwrap();
        assert_eq!((s.feature, s.threshold), (0, 1.5));
        // symmetric target: thresholds 0.5 and 2.5 tie, lower wins
        let y = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(best_split(&x, &[0, 1, 2, 3], &y, &[0], 1).unwrap().threshold, 0.5);
        assert!(best_split(&x, &[0, 1, 2, 3], &[2.0; 4], &[0, 1, 2], 1).is_none());
    }

    #[test]
    fn depth_and_leaf_limits() {
        let (x, y) = blobs(200, 2, 1.0, 0.5, 6);
        let t: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let rows: Vec<usize> = (0..200).collect();
        let mean = |r: &[usize]| r.iter().map(|&i| t[i]).sum::<f64>() / r.len() as f64;
        let tree = fit_tree(
            &x,
            &rows,
            &t,
            &mean,
            &TreeParams {
                max_depth: 3,
                min_samples_leaf: 10,
                max_features: None,
            },
            None,
        );
        assert!(tree.leaves() <= 8);
        let stump = fit_tree(
            &x,
            &rows,
            &t,
            &mean,
            &TreeParams {
                max_depth: 0,
                ..Default::default()
            },
            None,
        );
        assert_eq!(stump.nodes, vec![Node::Leaf { value: mean(&rows) }]);
    }

    proptest! {
        #[test]
        fn full_depth_tree_interpolates_distinct_points(vals in prop::collection::btree_set(-1000i32..1000, 2..40)) {
            let xs: Vec<f64> = vals.iter().map(|&v| v as f64 / 7.0).collect();
            let x = Matrix::from_rows(&xs.iter().map(|&v| vec![v]).collect::<Vec<_>>());
            let t: Vec<f64> = xs.iter().map(|v| (v * 3.0).sin()).collect();
            let rows: Vec<usize> = (0..xs.len()).collect();
            let mean = |r: &[usize]| r.iter().map(|&i| t[i]).sum::<f64>() / r.len() as f64;
            let tree = fit_tree(&x, &rows, &t, &mean, &TreeParams { max_depth: 64, ..Default::default() }, None);
            for (i, v) in xs.iter().enumerate() {
                prop_assert!((tree.predict(&[*v]) - t[i]).abs() < 1e-5);
            }
        }
    }
}
