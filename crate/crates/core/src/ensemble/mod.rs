//! The three model families: gradient boosting (`gb`), extremely randomized
//! trees (`ert`) and histogram leaf-wise boosting (`lgbm`).
//!
//! All fitting is squared-loss regression. A [`TrainedModel`] pairs one fitted
//! payload with the metadata needed to rebuild leaderboards from saved files.

mod ert;
mod gbm;
mod importance;
mod lgbm;
mod persist;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use ert::{fit_ert, ErtModel, ErtParams};
pub use gbm::{fit_gbm, GbParams, GbmModel};
pub use importance::{feature_importance, FeatureImportance};
pub use lgbm::{fit_lgbm, LgbmModel, LgbmParams};
pub use persist::{load_model, save_model, save_model_to_string, PersistError, SCHEMA_VERSION};

use crate::ingest::{FeatureVector, FEATURE_NAMES};
use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;
use crate::trees::{RegressionTree, TreeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Gb,
    Ert,
    Lgbm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Gb, Algorithm::Ert, Algorithm::Lgbm];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Gb => "gb",
            Self::Ert => "ert",
            Self::Lgbm => "lgbm",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.tag() == tag)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Hyperparameters of one family. Each variant has a distinct field set, so
/// the untagged form is unambiguous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperParams {
    Gb(GbParams),
    Ert(ErtParams),
    Lgbm(LgbmParams),
}

impl HyperParams {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Self::Gb(_) => Algorithm::Gb,
            Self::Ert(_) => Algorithm::Ert,
            Self::Lgbm(_) => Algorithm::Lgbm,
        }
    }

    /// Fits the matching family. `seed` only affects `ert`.
    pub fn fit<T: Scalar>(&self, x: &FeatureMatrix<T>, y: &[T], seed: u64) -> Result<ModelPayload<T>, TreeError> {
        Ok(match self {
            Self::Gb(p) => ModelPayload::Gb(fit_gbm(x, y, p)?),
            Self::Ert(p) => ModelPayload::Ert(fit_ert(x, y, p, seed)?),
            Self::Lgbm(p) => ModelPayload::Lgbm(fit_lgbm(x, y, p)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelPayload<T> {
    Gb(GbmModel<T>),
    Ert(ErtModel<T>),
    Lgbm(LgbmModel<T>),
}

impl<T: Scalar> ModelPayload<T> {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Self::Gb(_) => Algorithm::Gb,
            Self::Ert(_) => Algorithm::Ert,
            Self::Lgbm(_) => Algorithm::Lgbm,
        }
    }

    pub fn params(&self) -> HyperParams {
        match self {
            Self::Gb(m) => HyperParams::Gb(m.params),
            Self::Ert(m) => HyperParams::Ert(m.params),
            Self::Lgbm(m) => HyperParams::Lgbm(m.params),
        }
    }

    pub fn trees(&self) -> &[RegressionTree<T>] {
        match self {
            Self::Gb(m) => &m.trees,
            Self::Ert(m) => &m.trees,
            Self::Lgbm(m) => &m.trees,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            Self::Gb(m) => &m.feature_names,
            Self::Ert(m) => &m.feature_names,
            Self::Lgbm(m) => &m.feature_names,
        }
    }

    pub fn predict_with(&self, feature: impl Fn(usize) -> T + Copy) -> T {
        match self {
            Self::Gb(m) => m.predict_with(feature),
            Self::Ert(m) => m.predict_with(feature),
            Self::Lgbm(m) => m.predict_with(feature),
        }
    }

    pub fn predict_row(&self, row: &[T]) -> T {
        self.predict_with(|j| row[j])
    }

    pub fn predict_matrix(&self, x: &FeatureMatrix<T>) -> Vec<T> {
        (0..x.n_rows()).map(|i| self.predict_with(|j| x.get(i, j))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMetadata {
    pub station: String,
    pub seed: u64,
    pub train_row_count: usize,
    pub cv_nrmse: f64,
    pub cv_mape: f64,
    pub trained_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictError {
    #[error("model expects features {expected:?}, input provides {found:?}")]
    SchemaMismatch { expected: Vec<String>, found: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<T> {
    pub payload: ModelPayload<T>,
    pub metadata: ModelMetadata,
}

impl<T: Scalar> TrainedModel<T> {
    pub fn algorithm(&self) -> Algorithm {
        self.payload.algorithm()
    }

    /// Checks that the model was trained on the calendar feature schema.
    pub fn check_calendar_schema(&self) -> Result<(), PredictError> {
        let names = self.payload.feature_names();
        if names.iter().map(String::as_str).eq(FEATURE_NAMES) {
            Ok(())
        } else {
            Err(PredictError::SchemaMismatch {
                expected: names.to_vec(),
                found: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            })
        }
    }

    /// Prediction for one calendar row; unclamped.
    pub fn predict(&self, x: &FeatureVector) -> Result<T, PredictError> {
        self.check_calendar_schema()?;
        Ok(self.payload.predict_row(&x.values::<T>()))
    }
}
