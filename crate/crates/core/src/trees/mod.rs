//! Regression trees shared by the three ensemble families.
//!
//! All learners grow the same [`TreeNode`] structure: rows whose feature value
//! is `<= threshold` go left. Gains are stored on internal nodes so importance
//! can be recovered from a saved model.

mod cart;
mod extra;
mod histogram;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use cart::{best_exact_split, fit_cart, CartFitter, SplitCandidate, TreeParams};
pub use extra::{fit_extra_tree, ExtraTreeParams};
pub use histogram::{build_histograms, fit_hist_tree_leafwise, BinnedMatrix, HistogramBins, LeafwiseParams};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("no training rows")]
    EmptyInput,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("non-finite target at row {0}")]
    NonFiniteTarget(usize),
}

pub(crate) fn check_targets<T: Scalar>(n_rows: usize, targets: &[T]) -> Result<(), TreeError> {
    if n_rows == 0 {
        return Err(TreeError::EmptyInput);
    }
    if targets.len() != n_rows {
        return Err(TreeError::LengthMismatch {
            expected: n_rows,
            found: targets.len(),
        });
    }
    if let Some(i) = targets.iter().position(|t| !t.is_finite_value()) {
        return Err(TreeError::NonFiniteTarget(i));
    }
    Ok(())
}

/// Sum in slice order. Every learner sums node members in ascending row order
/// so that equal partitions produce bit-identical sums.
pub(crate) fn sum_rows<T: Scalar>(values: &[T], rows: &[usize]) -> T {
    rows.iter().fold(T::zero(), |acc, &i| acc + values[i])
}

pub(crate) fn all_equal<T: Scalar>(values: &[T], rows: &[usize]) -> bool {
    match rows.split_first() {
        Some((&first, rest)) => rest.iter().all(|&i| values[i] == values[first]),
        None => true,
    }
}

/// `S_L²/n_L + S_R²/n_R − S_P²/n_P`, the squared-error reduction of a split
/// written in terms of partition sums. Denominators may carry a ridge term.
#[inline]
pub(crate) fn partition_gain<T: Scalar>(left: T, n_left: T, right: T, n_right: T, parent: T, n_parent: T) -> T {
    left * left / n_left + right * right / n_right - parent * parent / n_parent
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode<T> {
    Internal {
        feature: usize,
        threshold: T,
        gain: T,
        left: Box<TreeNode<T>>,
        right: Box<TreeNode<T>>,
    },
    Leaf {
        value: T,
    },
}

impl<T: Scalar> TreeNode<T> {
    pub fn leaf(value: T) -> Self {
        Self::Leaf { value }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Self::Leaf { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree<T> {
    root: TreeNode<T>,
    n_leaves: usize,
    max_depth_reached: usize,
}

impl<T: Scalar> RegressionTree<T> {
    pub fn from_root(root: TreeNode<T>) -> Self {
        let mut n_leaves = 0;
        let mut max_depth = 0;
        let mut stack = vec![(&root, 0usize)];
        while let Some((node, depth)) = stack.pop() {
            match node {
                TreeNode::Leaf { .. } => {
                    n_leaves += 1;
                    max_depth = max_depth.max(depth);
                }
                TreeNode::Internal { left, right, .. } => {
                    stack.push((left, depth + 1));
                    stack.push((right, depth + 1));
                }
            }
        }
        Self {
            root,
            n_leaves,
            max_depth_reached: max_depth,
        }
    }

    pub fn single_leaf(value: T) -> Self {
        Self::from_root(TreeNode::leaf(value))
    }

    pub fn root(&self) -> &TreeNode<T> {
        &self.root
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn max_depth_reached(&self) -> usize {
        self.max_depth_reached
    }

    /// `true` for a lone leaf predicting zero, i.e. a tree that changes nothing
    /// when added to a boosted sum.
    pub fn is_zero_stump(&self) -> bool {
        matches!(self.root, TreeNode::Leaf { value } if value == T::zero())
    }

    /// Routes a row through the tree; `feature(j)` supplies the row's value of
    /// feature `j`.
    #[inline]
    pub fn predict_with(&self, feature: impl Fn(usize) -> T) -> T {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Internal {
                    feature: j,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if feature(*j) <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[T]) -> T {
        self.predict_with(|j| row[j])
    }

    /// `(feature, gain)` for every internal node, pre-order.
    pub fn splits(&self) -> Vec<(usize, T)> {
        let mut out = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            if let TreeNode::Internal {
                feature,
                gain,
                left,
                right,
                ..
            } = node
            {
                out.push((*feature, *gain));
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    /// Largest feature index referenced by a split.
    pub fn max_feature_index(&self) -> Option<usize> {
        self.splits().into_iter().map(|(f, _)| f).max()
    }

    pub fn leaf_values_finite(&self) -> bool {
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            match node {
                TreeNode::Leaf { value } => {
                    if !value.is_finite_value() {
                        return false;
                    }
                }
                TreeNode::Internal { left, right, .. } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        true
    }
}

impl<T: Serialize> Serialize for RegressionTree<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.root.serialize(serializer)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for RegressionTree<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        TreeNode::deserialize(deserializer).map(Self::from_root)
    }
}
