use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;
use crate::trees::{check_targets, fit_extra_tree, ExtraTreeParams, RegressionTree, TreeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErtParams {
    pub n_trees: usize,
    pub k_features: usize,
    pub min_samples_split: usize,
}

impl Default for ErtParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            k_features: 8,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErtModel<T> {
    pub params: ErtParams,
    pub trees: Vec<RegressionTree<T>>,
    pub feature_names: Vec<String>,
}

impl<T: Scalar> ErtModel<T> {
    /// Arithmetic mean of the per-tree predictions.
    pub fn predict_with(&self, feature: impl Fn(usize) -> T + Copy) -> T {
        let sum = self
            .trees
            .iter()
            .fold(T::zero(), |acc, t| acc + t.predict_with(feature));
        sum / T::from_count(self.trees.len())
    }
}

/// Fits `n_trees` extra-trees on the full sample; tree `i` uses seed
/// `seed + i`, so trees can be grown in any order.
pub fn fit_ert<T: Scalar>(x: &FeatureMatrix<T>, y: &[T], params: &ErtParams, seed: u64) -> Result<ErtModel<T>, TreeError> {
    check_targets(x.n_rows(), y)?;
    if params.n_trees < 1 {
        return Err(TreeError::InvalidParam("n_trees must be >= 1".into()));
    }
    let tree_params = ExtraTreeParams {
        k_features: params.k_features,
        min_samples_split: params.min_samples_split,
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| fit_extra_tree(x, y, &tree_params, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ErtModel {
        params: *params,
        trees,
        feature_names: x.names().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (FeatureMatrix<f64>, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..24).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let y = rows.iter().map(|r| r[0] + 10.0 * r[1]).collect();
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn forced_stop_predicts_mean() {
        let x = FeatureMatrix::from_columns(vec![vec![0.0, 1.0]]).unwrap();
        let p = ErtParams {
            n_trees: 1,
            k_features: 1,
            min_samples_split: 5,
        };
        let m = fit_ert(&x, &[2.0, 4.0], &p, 0).unwrap();
        assert_eq!(m.predict_with(|_| 0.0), 3.0);
    }

    #[test]
    fn prediction_is_mean_of_trees() {
        let (x, y) = data();
        let p = ErtParams {
            n_trees: 3,
            k_features: 1,
            min_samples_split: 6,
        };
        let m = fit_ert(&x, &y, &p, 5).unwrap();
        for probe in [[0.5, 3.0], [12.0, 6.0], [30.0, 0.0]] {
            let per_tree: Vec<f64> = m.trees.iter().map(|t| t.predict(&probe)).collect();
            let expected = (per_tree[0] + per_tree[1] + per_tree[2]) / 3.0;
            assert_eq!(m.predict_with(|j| probe[j]), expected);
        }
    }

    #[test]
    fn seeded_runs_agree() {
        let (x, y) = data();
        let p = ErtParams::default();
        assert_eq!(fit_ert(&x, &y, &p, 11).unwrap(), fit_ert(&x, &y, &p, 11).unwrap());
    }

    #[test]
    fn per_tree_seeds_are_offsets() {
        let (x, y) = data();
        let p = ErtParams {
            n_trees: 2,
            k_features: 1,
            min_samples_split: 2,
        };
        let m = fit_ert(&x, &y, &p, 7).unwrap();
        let tp = ExtraTreeParams {
            k_features: 1,
            min_samples_split: 2,
        };
        assert_eq!(m.trees[1], fit_extra_tree(&x, &y, &tp, 8).unwrap());
    }
}
