use serde::{Deserialize, Serialize};

use super::gbm::{learning_rate, mean};
use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;
use crate::trees::{build_histograms, check_targets, fit_hist_tree_leafwise, HistogramBins, LeafwiseParams, RegressionTree, TreeError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LgbmParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_bins: usize,
    pub max_leaves: usize,
    pub min_child_samples: usize,
    pub lambda: f64,
}

impl Default for LgbmParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_bins: 64,
            max_leaves: 31,
            min_child_samples: 20,
            lambda: 0.0,
        }
    }
}

impl LgbmParams {
    pub fn leafwise_params(&self) -> LeafwiseParams {
        LeafwiseParams {
            max_leaves: self.max_leaves,
            min_child_samples: self.min_child_samples,
            lambda: self.lambda,
        }
    }
}

/// Histogram-binned, leaf-wise gradient boosting.
#[derive(Debug, Clone, PartialEq)]
pub struct LgbmModel<T> {
    pub params: LgbmParams,
    pub f0: T,
    pub learning_rate: T,
    pub bins: HistogramBins<T>,
    /// Thresholds are bin edges in raw feature units, so prediction needs no binning.
    pub trees: Vec<RegressionTree<T>>,
    pub feature_names: Vec<String>,
}

impl<T: Scalar> LgbmModel<T> {
    pub fn predict_with(&self, feature: impl Fn(usize) -> T + Copy) -> T {
        self.trees
            .iter()
            .fold(self.f0, |acc, t| acc + self.learning_rate * t.predict_with(feature))
    }
}

/// Bins features once, then boosts leaf-wise trees on the gradients
/// `F(x_i) − y_i`. A zero-output tree ends training.
pub fn fit_lgbm<T: Scalar>(x: &FeatureMatrix<T>, y: &[T], params: &LgbmParams) -> Result<LgbmModel<T>, TreeError> {
    check_targets(x.n_rows(), y)?;
    let eta = learning_rate::<T>(params.learning_rate)?;
    if params.n_rounds < 1 {
        return Err(TreeError::InvalidParam("n_rounds must be >= 1".into()));
    }
    let leaf_params = params.leafwise_params();
    leaf_params.validate()?;

    let bins = build_histograms(x, params.max_bins)?;
    let binned = bins.bin_matrix(x);
    let f0 = mean(y);
    let mut fitted = vec![f0; y.len()];
    let mut gradients = vec![T::zero(); y.len()];
    let mut trees = Vec::with_capacity(params.n_rounds);
    for _ in 0..params.n_rounds {
        for ((g, &yi), &fi) in gradients.iter_mut().zip(y).zip(&fitted) {
            *g = fi - yi;
        }
        let tree = fit_hist_tree_leafwise(&binned, &gradients, &leaf_params)?;
        if tree.is_zero_stump() {
            break;
        }
        for (i, f) in fitted.iter_mut().enumerate() {
            *f = *f + eta * tree.predict_with(|j| x.get(i, j));
        }
        trees.push(tree);
    }
    Ok(LgbmModel {
        params: *params,
        f0,
        learning_rate: eta,
        bins,
        trees,
        feature_names: x.names().to_vec(),
    })
}
