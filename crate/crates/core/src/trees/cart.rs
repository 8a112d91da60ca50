use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{all_equal, check_targets, partition_gain, sum_rows, RegressionTree, TreeError, TreeNode};
use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;

/// Depth and size limits for exact CART growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_gain: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 3,
            min_samples_leaf: 1,
            min_gain: 0.0,
        }
    }
}

impl TreeParams {
    pub fn with_depth(max_depth: usize) -> Self {
        Self {
            max_depth,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        if self.max_depth < 1 {
            return Err(TreeError::InvalidParam("max_depth must be >= 1".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(TreeError::InvalidParam("min_samples_leaf must be >= 1".into()));
        }
        if !(self.min_gain >= 0.0 && self.min_gain.is_finite()) {
            return Err(TreeError::InvalidParam("min_gain must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate<T> {
    pub feature_index: usize,
    pub threshold: T,
    /// Reduction in summed squared error.
    pub gain: T,
}

fn cmp_values<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Row indices ordered by feature value, ties by row index.
fn sorted_by_value<T: Scalar>(values: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| cmp_values(&values[a], &values[b]).then(a.cmp(&b)));
    idx
}

/// Best `(threshold, gain, n_left)` for one feature of a node.
///
/// `sorted_rows` holds the node's rows in value order. Targets are summed one
/// group of equal values at a time and then added to the running left sum,
/// which is the same association a histogram with one bin per value uses.
fn scan_feature<T: Scalar>(
    values: &[T],
    targets: &[T],
    sorted_rows: &[usize],
    parent_sum: T,
    min_leaf: usize,
) -> Option<(T, T, usize)> {
    let n = sorted_rows.len();
    let n_parent = T::from_count(n);
    let mut left = T::zero();
    let mut best: Option<(T, T, usize)> = None;
    let mut i = 0;
    while i < n {
        let v = values[sorted_rows[i]];
        let mut group = T::zero();
        let mut j = i;
        while j < n && values[sorted_rows[j]] == v {
            group = group + targets[sorted_rows[j]];
            j += 1;
        }
        left = left + group;
        if j == n {
            break;
        }
        let n_right = n - j;
        if j >= min_leaf && n_right >= min_leaf {
            let right = parent_sum - left;
            let gain = partition_gain(left, T::from_count(j), right, T::from_count(n_right), parent_sum, n_parent);
            if best.is_none_or(|(_, g, _)| gain > g) {
                let next = values[sorted_rows[j]];
                let mut threshold = T::midpoint(v, next);
                if !(threshold < next) {
                    threshold = v;
                }
                best = Some((threshold, gain, j));
            }
        }
        i = j;
    }
    best
}

/// Variance-reduction split of a single feature. Thresholds are midpoints of
/// adjacent distinct values; the smallest threshold wins ties. Returns `None`
/// when the feature is constant or no split has positive gain.
pub fn best_exact_split<T: Scalar>(
    feature_values: &[T],
    targets: &[T],
) -> Result<Option<SplitCandidate<T>>, TreeError> {
    check_targets(feature_values.len(), targets)?;
    let rows: Vec<usize> = (0..targets.len()).collect();
    let parent = sum_rows(targets, &rows);
    let sorted = sorted_by_value(feature_values);
    Ok(scan_feature(feature_values, targets, &sorted, parent, 1)
        .filter(|(_, gain, _)| *gain > T::zero())
        .map(|(threshold, gain, _)| SplitCandidate {
            feature_index: 0,
            threshold,
            gain,
        }))
}

/// Exact greedy CART over a fixed feature matrix.
///
/// Per-feature row orderings are computed once and reused for every tree fit
/// against the same matrix, which is what boosting does each round.
pub struct CartFitter<'a, T> {
    x: &'a FeatureMatrix<T>,
    sorted: Vec<Vec<usize>>,
}

impl<'a, T: Scalar> CartFitter<'a, T> {
    pub fn new(x: &'a FeatureMatrix<T>) -> Result<Self, TreeError> {
        if x.is_empty() {
            return Err(TreeError::EmptyInput);
        }
        let sorted = (0..x.n_features()).map(|j| sorted_by_value(x.column(j))).collect();
        Ok(Self { x, sorted })
    }

    pub fn fit(&self, targets: &[T], params: &TreeParams) -> Result<RegressionTree<T>, TreeError> {
        params.validate()?;
        check_targets(self.x.n_rows(), targets)?;
        let min_gain = T::from_f64(params.min_gain)
            .ok_or_else(|| TreeError::InvalidParam("min_gain not representable".into()))?;
        let mut grower = Grower {
            x: self.x,
            y: targets,
            params,
            min_gain,
            goes_left: vec![false; self.x.n_rows()],
        };
        let rows = (0..self.x.n_rows()).collect();
        let root = grower.grow(rows, self.sorted.clone(), 0);
        Ok(RegressionTree::from_root(root))
    }
}

/// Fits one CART tree; see [`CartFitter`] for repeated fits on the same rows.
pub fn fit_cart<T: Scalar>(
    x: &FeatureMatrix<T>,
    targets: &[T],
    params: &TreeParams,
) -> Result<RegressionTree<T>, TreeError> {
    CartFitter::new(x)?.fit(targets, params)
}

struct Grower<'a, T> {
    x: &'a FeatureMatrix<T>,
    y: &'a [T],
    params: &'a TreeParams,
    min_gain: T,
    goes_left: Vec<bool>,
}

impl<T: Scalar> Grower<'_, T> {
    /// Best split over all features: highest gain, then lowest feature index,
    /// then smallest threshold.
    fn best_split(&self, sorted: &[Vec<usize>], parent_sum: T) -> Option<(SplitCandidate<T>, usize)> {
        let mut best: Option<(SplitCandidate<T>, usize)> = None;
        for (j, rows) in sorted.iter().enumerate() {
            let found = scan_feature(self.x.column(j), self.y, rows, parent_sum, self.params.min_samples_leaf);
            if let Some((threshold, gain, n_left)) = found {
                if best.as_ref().is_none_or(|(b, _)| gain > b.gain) {
                    best = Some((
                        SplitCandidate {
                            feature_index: j,
                            threshold,
                            gain,
                        },
                        n_left,
                    ));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, sorted: Vec<Vec<usize>>, depth: usize) -> TreeNode<T> {
        let n = rows.len();
        let sum = sum_rows(self.y, &rows);
        let value = sum / T::from_count(n);
        if depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf || all_equal(self.y, &rows) {
            return TreeNode::leaf(value);
        }
        let Some((split, n_left)) = self.best_split(&sorted, sum) else {
            return TreeNode::leaf(value);
        };
        if !(split.gain > self.min_gain) {
            return TreeNode::leaf(value);
        }

        for &r in &sorted[split.feature_index][..n_left] {
            self.goes_left[r] = true;
        }
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| self.goes_left[r]);
        let mut left_sorted = Vec::with_capacity(sorted.len());
        let mut right_sorted = Vec::with_capacity(sorted.len());
        for list in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = list.into_iter().partition(|&r| self.goes_left[r]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        for &r in &left_rows {
            self.goes_left[r] = false;
        }

        let left = self.grow(left_rows, left_sorted, depth + 1);
        let right = self.grow(right_rows, right_sorted, depth + 1);
        TreeNode::Internal {
            feature: split.feature_index,
            threshold: split.threshold,
            gain: split.gain,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> FeatureMatrix<f64> {
        FeatureMatrix::from_columns(vec![values.to_vec()]).unwrap()
    }

    #[test]
    fn exact_split_on_identity() {
        let s = best_exact_split(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap().unwrap();
        assert_eq!(s.threshold, 2.5);
        assert_eq!(s.gain, 4.0);
    }

    #[test]
    fn exact_split_unsorted_input() {
        let s = best_exact_split(&[4.0, 1.0, 3.0, 2.0], &[4.0, 1.0, 3.0, 2.0]).unwrap().unwrap();
        assert_eq!((s.threshold, s.gain), (2.5, 4.0));
    }

    #[test]
    fn no_split_for_constant_feature_or_target() {
        assert_eq!(best_exact_split(&[7.0, 7.0, 7.0], &[1.0, 2.0, 3.0]).unwrap(), None);
        assert_eq!(best_exact_split(&[1.0, 2.0], &[5.0, 5.0]).unwrap(), None);
        assert_eq!(
            best_exact_split(&[1.0, 2.0], &[5.0]),
            Err(TreeError::LengthMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn exact_split_tie_prefers_smallest_threshold() {
        // Splitting after 1 or after 3 gives the same gain of 1/3.
        let s = best_exact_split(&[1.0, 2.0, 3.0, 4.0], &[0.0, 1.0, 1.0, 0.0]).unwrap().unwrap();
        assert_eq!(s.threshold, 1.5);
    }

    #[test]
    fn constant_target_is_single_leaf() {
        let t = fit_cart(&column(&[1.0, 2.0, 3.0]), &[4.0, 4.0, 4.0], &TreeParams::with_depth(5)).unwrap();
        assert_eq!(t.n_leaves(), 1);
        assert_eq!(t.predict(&[10.0]), 4.0);
    }

    #[test]
    fn depth_one_stump() {
        let x = column(&[1.0, 2.0, 3.0, 4.0]);
        let t = fit_cart(&x, &[1.0, 2.0, 3.0, 4.0], &TreeParams::with_depth(1)).unwrap();
        match t.root() {
            TreeNode::Internal { threshold, left, right, .. } => {
                assert_eq!(*threshold, 2.5);
                assert_eq!(**left, TreeNode::leaf(1.5));
                assert_eq!(**right, TreeNode::leaf(3.5));
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn depth_three_isolates_eight_points() {
        let xs: Vec<f64> = (1..=8).map(f64::from).collect();
        let t = fit_cart(&column(&xs), &xs, &TreeParams::with_depth(3)).unwrap();
        assert_eq!(t.n_leaves(), 8);
        for &v in &xs {
            assert_eq!(t.predict(&[v]), v);
        }
    }

    #[test]
    fn min_samples_leaf_respected() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let params = TreeParams {
            max_depth: 10,
            min_samples_leaf: 3,
            min_gain: 0.0,
        };
        let t = fit_cart(&column(&xs), &xs, &params).unwrap();
        // Every leaf holds at least 3 of the 10 rows, so at most 3 leaves.
        assert!(t.n_leaves() <= 3);
        let mut counts = std::collections::HashMap::new();
        for &v in &xs {
            *counts.entry(t.predict(&[v]).to_bits()).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 3));
    }

    #[test]
    fn lowest_feature_wins_ties() {
        let x = FeatureMatrix::from_columns(vec![vec![0.0, 0.0, 1.0, 1.0], vec![0.0, 0.0, 1.0, 1.0]]).unwrap();
        let t = fit_cart(&x, &[1.0, 1.0, 5.0, 5.0], &TreeParams::with_depth(1)).unwrap();
        assert_eq!(t.splits()[0].0, 0);
    }

    #[test]
    fn rejects_bad_input() {
        let x = column(&[1.0]);
        assert_eq!(fit_cart(&x, &[], &TreeParams::default()).unwrap_err(), TreeError::LengthMismatch {
            expected: 1,
            found: 0
        });
        let empty = FeatureMatrix::<f64>::from_rows::<Vec<f64>>(&[]).unwrap();
        assert_eq!(fit_cart(&empty, &[], &TreeParams::default()).unwrap_err(), TreeError::EmptyInput);
        assert!(fit_cart(&x, &[1.0], &TreeParams::with_depth(0)).is_err());
        assert_eq!(fit_cart(&x, &[f64::NAN], &TreeParams::default()).unwrap_err(), TreeError::NonFiniteTarget(0));
    }
}
