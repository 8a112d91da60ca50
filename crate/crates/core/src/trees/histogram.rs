use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{all_equal, check_targets, partition_gain, sum_rows, RegressionTree, TreeError, TreeNode};
use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;

/// Per-feature bin upper edges. A value `v` falls in the first bin `b` with
/// `v <= edges[b]`, or in the overflow bin `edges.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramBins<T> {
    pub max_bins: usize,
    pub edges: Vec<Vec<T>>,
}

impl<T: Scalar> HistogramBins<T> {
    pub fn n_bins(&self, feature: usize) -> usize {
        self.edges[feature].len() + 1
    }

    #[inline]
    pub fn bin_of(&self, feature: usize, value: T) -> usize {
        self.edges[feature].partition_point(|e| *e < value)
    }

    pub fn bin_matrix(&self, x: &FeatureMatrix<T>) -> BinnedMatrix<T> {
        let codes = (0..x.n_features())
            .map(|j| x.column(j).iter().map(|&v| self.bin_of(j, v) as u32).collect())
            .collect();
        BinnedMatrix {
            bins: self.clone(),
            codes,
            n_rows: x.n_rows(),
        }
    }
}

/// Quantile bin edges for every feature.
///
/// A feature with at most `max_bins` distinct values gets one bin per value.
/// Otherwise edges sit at the empirical quantiles `q = i / max_bins`,
/// `i = 1..max_bins-1`, with the quantile of sorted values `v` at `q` taken as
/// `v[ceil(q·n) − 1]`; repeated edges are dropped.
pub fn build_histograms<T: Scalar>(x: &FeatureMatrix<T>, max_bins: usize) -> Result<HistogramBins<T>, TreeError> {
    if max_bins < 2 {
        return Err(TreeError::InvalidParam("max_bins must be >= 2".into()));
    }
    if x.is_empty() {
        return Err(TreeError::EmptyInput);
    }
    let n = x.n_rows();
    let edges = (0..x.n_features())
        .map(|j| {
            let mut v = x.column(j).to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            let mut distinct = v.clone();
            distinct.dedup();
            if distinct.len() <= max_bins {
                distinct.pop();
                return distinct;
            }
            let mut edges: Vec<T> = Vec::with_capacity(max_bins - 1);
            for i in 1..max_bins {
                let idx = (i * n).div_ceil(max_bins) - 1;
                let e = v[idx];
                if edges.last().is_none_or(|last| e > *last) {
                    edges.push(e);
                }
            }
            edges
        })
        .collect();
    Ok(HistogramBins { max_bins, edges })
}

/// Feature matrix encoded as bin indices, column-major.
#[derive(Debug, Clone)]
pub struct BinnedMatrix<T> {
    bins: HistogramBins<T>,
    codes: Vec<Vec<u32>>,
    n_rows: usize,
}

impl<T: Scalar> BinnedMatrix<T> {
    pub fn bins(&self) -> &HistogramBins<T> {
        &self.bins
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.codes.len()
    }

    pub fn codes(&self, feature: usize) -> &[u32] {
        &self.codes[feature]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafwiseParams {
    pub max_leaves: usize,
    pub min_child_samples: usize,
    /// L2 penalty added to every leaf's row count.
    pub lambda: f64,
}

impl LeafwiseParams {
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.max_leaves < 2 {
            return Err(TreeError::InvalidParam("max_leaves must be >= 2".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(TreeError::InvalidParam("lambda must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct BinSplit<T> {
    feature: usize,
    bin: u32,
    threshold: T,
    gain: T,
}

struct OpenLeaf<T> {
    node: usize,
    rows: Vec<usize>,
    best: Option<BinSplit<T>>,
}

enum ArenaNode<T> {
    Leaf(T),
    Internal {
        feature: usize,
        threshold: T,
        gain: T,
        left: usize,
        right: usize,
    },
}

/// Best-first tree growth on binned features for squared loss (unit hessian).
///
/// `gradients[i]` is `prediction_i − target_i`. The leaf with the largest
/// `G_L²/(n_L+λ) + G_R²/(n_R+λ) − G_P²/(n_P+λ)` is split until the leaf budget
/// is spent or no leaf has a positive-gain split with both children holding at
/// least `min_child_samples` rows. Leaves output `−G/(n+λ)`. Thresholds are the
/// raw-unit upper edge of the last bin sent left.
pub fn fit_hist_tree_leafwise<T: Scalar>(
    binned: &BinnedMatrix<T>,
    gradients: &[T],
    params: &LeafwiseParams,
) -> Result<RegressionTree<T>, TreeError> {
    params.validate()?;
    check_targets(binned.n_rows(), gradients)?;
    let lambda =
        T::from_f64(params.lambda).ok_or_else(|| TreeError::InvalidParam("lambda not representable".into()))?;
    let grower = LeafwiseGrower {
        binned,
        g: gradients,
        lambda,
        min_child: params.min_child_samples.max(1),
    };

    let root_rows: Vec<usize> = (0..binned.n_rows()).collect();
    let mut arena = vec![ArenaNode::Leaf(grower.leaf_output(&root_rows))];
    let mut open = vec![OpenLeaf {
        node: 0,
        best: grower.best_split(&root_rows),
        rows: root_rows,
    }];
    let mut n_leaves = 1;

    while n_leaves < params.max_leaves {
        // Largest gain; earlier-created leaves win ties.
        let mut pick: Option<(usize, T)> = None;
        for (i, leaf) in open.iter().enumerate() {
            if let Some(split) = &leaf.best {
                if pick.is_none_or(|(_, g)| split.gain > g) {
                    pick = Some((i, split.gain));
                }
            }
        }
        let Some((i, _)) = pick else { break };
        let leaf = open.remove(i);
        let split = leaf.best.expect("picked leaf has a split");
        let codes = binned.codes(split.feature);
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            leaf.rows.into_iter().partition(|&r| codes[r] <= split.bin);

        let left_id = arena.len();
        arena.push(ArenaNode::Leaf(grower.leaf_output(&left_rows)));
        let right_id = arena.len();
        arena.push(ArenaNode::Leaf(grower.leaf_output(&right_rows)));
        arena[leaf.node] = ArenaNode::Internal {
            feature: split.feature,
            threshold: split.threshold,
            gain: split.gain,
            left: left_id,
            right: right_id,
        };
        n_leaves += 1;

        let mut children = [(left_id, left_rows), (right_id, right_rows)]
            .into_iter()
            .map(|(node, rows)| OpenLeaf {
                node,
                best: grower.best_split(&rows),
                rows,
            })
            .collect();
        open.append(&mut children);
        open.sort_by_key(|l| l.node);
    }

    Ok(RegressionTree::from_root(to_tree(&arena, 0)))
}

fn to_tree<T: Scalar>(arena: &[ArenaNode<T>], id: usize) -> TreeNode<T> {
    match &arena[id] {
        ArenaNode::Leaf(v) => TreeNode::leaf(*v),
        ArenaNode::Internal {
            feature,
            threshold,
            gain,
            left,
            right,
        } => TreeNode::Internal {
            feature: *feature,
            threshold: *threshold,
            gain: *gain,
            left: Box::new(to_tree(arena, *left)),
            right: Box::new(to_tree(arena, *right)),
        },
    }
}

struct LeafwiseGrower<'a, T> {
    binned: &'a BinnedMatrix<T>,
    g: &'a [T],
    lambda: T,
    min_child: usize,
}

impl<T: Scalar> LeafwiseGrower<'_, T> {
    fn denom(&self, n: usize) -> T {
        T::from_count(n) + self.lambda
    }

    fn leaf_output(&self, rows: &[usize]) -> T {
        let g = sum_rows(self.g, rows);
        if g == T::zero() {
            T::zero()
        } else {
            T::zero() - g / self.denom(rows.len())
        }
    }

    fn best_split(&self, rows: &[usize]) -> Option<BinSplit<T>> {
        let n = rows.len();
        if n < 2 * self.min_child || all_equal(self.g, rows) {
            return None;
        }
        let parent = sum_rows(self.g, rows);
        let parent_denom = self.denom(n);
        let mut best: Option<BinSplit<T>> = None;
        let mut sums: Vec<T> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for j in 0..self.binned.n_features() {
            let n_bins = self.binned.bins.n_bins(j);
            if n_bins < 2 {
                continue;
            }
            sums.clear();
            sums.resize(n_bins, T::zero());
            counts.clear();
            counts.resize(n_bins, 0);
            let codes = self.binned.codes(j);
            for &r in rows {
                let b = codes[r] as usize;
                sums[b] = sums[b] + self.g[r];
                counts[b] += 1;
            }
            let (mut left, mut n_left) = (T::zero(), 0usize);
            for b in 0..n_bins - 1 {
                left = left + sums[b];
                n_left += counts[b];
                let n_right = n - n_left;
                if n_left < self.min_child || n_right < self.min_child {
                    continue;
                }
                let right = parent - left;
                let gain = partition_gain(left, self.denom(n_left), right, self.denom(n_right), parent, parent_denom);
                if gain > T::zero() && best.as_ref().is_none_or(|s| gain > s.gain) {
                    best = Some(BinSplit {
                        feature: j,
                        bin: b as u32,
                        threshold: self.binned.bins.edges[j][b],
                        gain,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> FeatureMatrix<f64> {
        FeatureMatrix::from_columns(vec![values.to_vec()]).unwrap()
    }

    #[test]
    fn quantile_edge_for_two_bins() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        let bins = build_histograms(&column(&xs), 2).unwrap();
        assert_eq!(bins.edges, vec![vec![5.0]]);
    }

    #[test]
    fn quantile_edges_follow_ceil_rule() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        let bins = build_histograms(&column(&xs), 4).unwrap();
        // q = .25, .5, .75 -> v[2], v[4], v[7]
        assert_eq!(bins.edges, vec![vec![3.0, 5.0, 8.0]]);
    }

    #[test]
    fn constant_feature_has_no_edges() {
        let bins = build_histograms(&column(&[3.0; 5]), 8).unwrap();
        assert!(bins.edges[0].is_empty());
        assert_eq!(bins.n_bins(0), 1);
    }

    #[test]
    fn few_distinct_values_get_own_bins() {
        let bins = build_histograms(&column(&[2.0, 1.0, 2.0, 9.0, 1.0]), 4).unwrap();
        assert_eq!(bins.edges, vec![vec![1.0, 2.0]]);
        assert_eq!(bins.bin_of(0, 1.0), 0);
        assert_eq!(bins.bin_of(0, 1.5), 1);
        assert_eq!(bins.bin_of(0, 9.0), 2);
        assert_eq!(bins.bin_of(0, 100.0), 2);
    }

    #[test]
    fn bad_bin_count() {
        assert!(build_histograms(&column(&[1.0]), 1).is_err());
    }

    fn params(max_leaves: usize) -> LeafwiseParams {
        LeafwiseParams {
            max_leaves,
            min_child_samples: 1,
            lambda: 0.0,
        }
    }

    #[test]
    fn zero_gradients_single_zero_leaf() {
        let x = column(&[1.0, 2.0, 3.0]);
        let binned = build_histograms(&x, 16).unwrap().bin_matrix(&x);
        let t = fit_hist_tree_leafwise(&binned, &[0.0; 3], &params(8)).unwrap();
        assert!(t.is_zero_stump());
    }

    #[test]
    fn hand_evaluated_gain() {
        let x = column(&[0.0, 0.0, 1.0, 1.0]);
        let binned = build_histograms(&x, 16).unwrap().bin_matrix(&x);
        let t = fit_hist_tree_leafwise(&binned, &[-1.0, -1.0, 1.0, 1.0], &params(8)).unwrap();
        // G_L = -2, G_R = 2, G_P = 0: 4/2 + 4/2 - 0, the full SSE of the gradients.
        assert_eq!(t.splits(), vec![(0, 4.0)]);
        assert_eq!(t.predict(&[0.0]), 1.0);
        assert_eq!(t.predict(&[1.0]), -1.0);
    }

    #[test]
    fn two_leaf_budget_is_a_stump() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let g: Vec<f64> = xs.iter().map(|v| (v * 1.7).sin()).collect();
        let x = column(&xs);
        let binned = build_histograms(&x, 64).unwrap().bin_matrix(&x);
        let t = fit_hist_tree_leafwise(&binned, &g, &params(2)).unwrap();
        assert_eq!(t.n_leaves(), 2);
        let t = fit_hist_tree_leafwise(&binned, &g, &params(5)).unwrap();
        assert_eq!(t.n_leaves(), 5);
    }

    #[test]
    fn lambda_shrinks_outputs() {
        let x = column(&[0.0, 1.0]);
        let binned = build_histograms(&x, 4).unwrap().bin_matrix(&x);
        let p = LeafwiseParams {
            max_leaves: 2,
            min_child_samples: 1,
            lambda: 1.0,
        };
        let t = fit_hist_tree_leafwise(&binned, &[-2.0, 2.0], &p).unwrap();
        // -G/(n+λ) = 2/2 and -2/2
        assert_eq!(t.predict(&[0.0]), 1.0);
        assert_eq!(t.predict(&[1.0]), -1.0);
    }

    #[test]
    fn min_child_samples_blocks_splits() {
        let x = column(&[0.0, 1.0, 2.0, 3.0]);
        let binned = build_histograms(&x, 8).unwrap().bin_matrix(&x);
        let p = LeafwiseParams {
            max_leaves: 8,
            min_child_samples: 3,
            lambda: 0.0,
        };
        let t = fit_hist_tree_leafwise(&binned, &[1.0, 2.0, 3.0, 4.0], &p).unwrap();
        assert_eq!(t.n_leaves(), 1);
    }
}
