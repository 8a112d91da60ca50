use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{all_equal, check_targets, partition_gain, sum_rows, RegressionTree, TreeError, TreeNode};
use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraTreeParams {
    /// Features sampled per node.
    pub k_features: usize,
    pub min_samples_split: usize,
}

impl ExtraTreeParams {
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.k_features < 1 {
            return Err(TreeError::InvalidParam("k_features must be >= 1".into()));
        }
        Ok(())
    }
}

/// Extremely randomized regression tree.
///
/// Each node samples `min(k_features, n_features)` distinct features, draws a
/// single uniform threshold between the node's min and max of each, and keeps
/// the draw with the largest squared-error reduction. Nodes smaller than
/// `min_samples_split`, pure nodes, and nodes whose sampled features are all
/// constant become leaves holding the mean target.
pub fn fit_extra_tree<T: Scalar>(
    x: &FeatureMatrix<T>,
    targets: &[T],
    params: &ExtraTreeParams,
    seed: u64,
) -> Result<RegressionTree<T>, TreeError> {
    params.validate()?;
    check_targets(x.n_rows(), targets)?;
    let mut grower = ExtraGrower {
        x,
        y: targets,
        params,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let root = grower.grow((0..x.n_rows()).collect());
    Ok(RegressionTree::from_root(root))
}

struct ExtraGrower<'a, T> {
    x: &'a FeatureMatrix<T>,
    y: &'a [T],
    params: &'a ExtraTreeParams,
    rng: ChaCha8Rng,
}

impl<T: Scalar> ExtraGrower<'_, T> {
    fn grow(&mut self, rows: Vec<usize>) -> TreeNode<T> {
        let n = rows.len();
        let sum = sum_rows(self.y, &rows);
        let value = sum / T::from_count(n);
        if n < self.params.min_samples_split || n < 2 || all_equal(self.y, &rows) {
            return TreeNode::leaf(value);
        }

        let n_features = self.x.n_features();
        let k = self.params.k_features.min(n_features);
        let mut features = sample(&mut self.rng, n_features, k).into_vec();
        features.sort_unstable();

        let n_parent = T::from_count(n);
        // (gain, feature, threshold)
        let mut best: Option<(T, usize, T)> = None;
        for j in features {
            let col = self.x.column(j);
            let (lo, hi) = rows.iter().fold((col[rows[0]], col[rows[0]]), |(lo, hi), &r| {
                let v = col[r];
                (if v < lo { v } else { lo }, if v > hi { v } else { hi })
            });
            if !(lo < hi) {
                continue;
            }
            let u = T::from_f64(self.rng.gen::<f64>()).unwrap_or_else(T::zero);
            let mut threshold = lo + (hi - lo) * u;
            if !(threshold < hi) {
                threshold = lo;
            }
            let (mut left, mut n_left) = (T::zero(), 0usize);
            for &r in &rows {
                if col[r] <= threshold {
                    left = left + self.y[r];
                    n_left += 1;
                }
            }
            let right = sum - left;
            let gain = partition_gain(
                left,
                T::from_count(n_left),
                right,
                T::from_count(n - n_left),
                sum,
                n_parent,
            );
            if best.as_ref().is_none_or(|(g, _, _)| gain > *g) {
                best = Some((gain, j, threshold));
            }
        }

        let Some((gain, feature, threshold)) = best else {
            return TreeNode::leaf(value);
        };
        if !(gain > T::zero()) {
            return TreeNode::leaf(value);
        }
        let col = self.x.column(feature);
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&r| col[r] <= threshold);
        let left = self.grow(left_rows);
        let right = self.grow(right_rows);
        TreeNode::Internal {
            feature,
            threshold,
            gain,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}
