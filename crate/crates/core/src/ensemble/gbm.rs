use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;
use crate::trees::{check_targets, CartFitter, RegressionTree, TreeError, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_gain: f64,
}

impl Default for GbParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 1,
            min_gain: 0.0,
        }
    }
}

impl GbParams {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            min_gain: self.min_gain,
        }
    }
}

pub(super) fn learning_rate<T: Scalar>(rate: f64) -> Result<T, TreeError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(TreeError::InvalidParam(format!("learning_rate {rate} outside (0, 1]")));
    }
    T::from_f64(rate).ok_or_else(|| TreeError::InvalidParam("learning_rate not representable".into()))
}

pub(super) fn mean<T: Scalar>(y: &[T]) -> T {
    y.iter().fold(T::zero(), |acc, &v| acc + v) / T::from_count(y.len())
}

/// Squared-loss gradient boosting over exact CART trees.
#[derive(Debug, Clone, PartialEq)]
pub struct GbmModel<T> {
    pub params: GbParams,
    /// Training-target mean.
    pub f0: T,
    pub learning_rate: T,
    pub trees: Vec<RegressionTree<T>>,
    pub feature_names: Vec<String>,
}

impl<T: Scalar> GbmModel<T> {
    /// `f0 + η·Σ tree_m(x)`, accumulated round by round exactly as in training.
    pub fn predict_with(&self, feature: impl Fn(usize) -> T + Copy) -> T {
        self.trees
            .iter()
            .fold(self.f0, |acc, t| acc + self.learning_rate * t.predict_with(feature))
    }
}

/// Fits `n_rounds` CART trees to the running residuals `y − F`. Training stops
/// early when a round's tree is a single zero leaf.
pub fn fit_gbm<T: Scalar>(x: &FeatureMatrix<T>, y: &[T], params: &GbParams) -> Result<GbmModel<T>, TreeError> {
    check_targets(x.n_rows(), y)?;
    let eta = learning_rate::<T>(params.learning_rate)?;
    if params.n_rounds < 1 {
        return Err(TreeError::InvalidParam("n_rounds must be >= 1".into()));
    }
    let tree_params = params.tree_params();
    tree_params.validate()?;

    let f0 = mean(y);
    let fitter = CartFitter::new(x)?;
    let mut fitted = vec![f0; y.len()];
    let mut residuals = vec![T::zero(); y.len()];
    let mut trees = Vec::with_capacity(params.n_rounds);
    for _ in 0..params.n_rounds {
        for ((r, &yi), &fi) in residuals.iter_mut().zip(y).zip(&fitted) {
            *r = yi - fi;
        }
        let tree = fitter.fit(&residuals, &tree_params)?;
        if tree.is_zero_stump() {
            break;
        }
        for (i, f) in fitted.iter_mut().enumerate() {
            *f = *f + eta * tree.predict_with(|j| x.get(i, j));
        }
        trees.push(tree);
    }
    Ok(GbmModel {
        params: *params,
        f0,
        learning_rate: eta,
        trees,
        feature_names: x.names().to_vec(),
    })
}
