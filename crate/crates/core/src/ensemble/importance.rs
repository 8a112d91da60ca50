use serde::Serialize;

use super::ModelPayload;
use crate::scalar::Scalar;

/// Gain-based importance: every split's gain is credited to its feature and
/// the totals are normalized to shares summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureImportance<T> {
    /// `(feature_name, share)` in feature declaration order.
    pub shares: Vec<(String, T)>,
    /// Set when the model has no splits; all shares are then zero.
    pub no_splits: bool,
}

pub fn feature_importance<T: Scalar>(model: &ModelPayload<T>) -> FeatureImportance<T> {
    let names = model.feature_names();
    let mut totals = vec![T::zero(); names.len()];
    let mut any = false;
    for tree in model.trees() {
        for (feature, gain) in tree.splits() {
            totals[feature] = totals[feature] + gain;
            any = true;
        }
    }
    let sum = totals.iter().fold(T::zero(), |acc, &g| acc + g);
    let no_splits = !any || !(sum > T::zero());
    let shares = names
        .iter()
        .zip(totals)
        .map(|(n, g)| (n.clone(), if no_splits { T::zero() } else { g / sum }))
        .collect();
    FeatureImportance { shares, no_splits }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{GbParams, GbmModel};
    use crate::trees::{RegressionTree, TreeNode};

    fn gb(trees: Vec<RegressionTree<f64>>) -> ModelPayload<f64> {
        ModelPayload::Gb(GbmModel {
            params: GbParams::default(),
            f0: 0.0,
            learning_rate: 0.1,
            trees,
            feature_names: vec!["t_index".into(), "year".into(), "is_weekend".into()],
        })
    }

    fn stump(feature: usize, gain: f64) -> RegressionTree<f64> {
        RegressionTree::from_root(TreeNode::Internal {
            feature,
            threshold: 0.5,
            gain,
            left: Box::new(TreeNode::leaf(0.0)),
            right: Box::new(TreeNode::leaf(1.0)),
        })
    }

    #[test]
    fn single_feature_gets_everything() {
        let imp = feature_importance(&gb(vec![stump(0, 3.0), stump(0, 1.0)]));
        assert!(!imp.no_splits);
        assert_eq!(imp.shares[0], ("t_index".to_string(), 1.0));
        assert_eq!(imp.shares[1].1, 0.0);
        assert_eq!(imp.shares[2].1, 0.0);
    }

    #[test]
    fn no_trees_flagged() {
        let imp = feature_importance(&gb(vec![]));
        assert!(imp.no_splits);
        assert!(imp.shares.iter().all(|(_, s)| *s == 0.0));
    }

    #[test]
    fn shares_are_normalized() {
        let imp = feature_importance(&gb(vec![stump(0, 3.0), stump(2, 1.0)]));
        assert_eq!(imp.shares[0].1, 0.75);
        assert_eq!(imp.shares[2].1, 0.25);
    }
}
