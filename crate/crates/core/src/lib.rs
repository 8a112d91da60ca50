//! Daily station ridership forecasting.
//!
//! Raw per-station counts are cleaned and expanded into calendar features
//! ([`ingest`]), fitted with one of three tree ensembles ([`ensemble`], built
//! on [`trees`]), chosen by a rolling-origin NRMSE search ([`select`]) and
//! applied to future days ([`forecast`]). [`cli`] wires these into the
//! `ridecast` binary.
//!
//! The learners are generic over [`scalar::Scalar`]; the aliases below fix the
//! scalar to `f64`, which is what the command line uses.

pub mod cli;
pub mod ensemble;
pub mod forecast;
pub mod ingest;
pub mod matrix;
pub mod scalar;
pub mod select;
pub mod trees;

pub type FeatureMatrix = matrix::FeatureMatrix<f64>;
pub type RegressionTree = trees::RegressionTree<f64>;
pub type GbmModel = ensemble::GbmModel<f64>;
pub type ErtModel = ensemble::ErtModel<f64>;
pub type LgbmModel = ensemble::LgbmModel<f64>;
pub type ModelPayload = ensemble::ModelPayload<f64>;
pub type TrainedModel = ensemble::TrainedModel<f64>;
pub type TrainingData = select::TrainingData<f64>;

pub type FeatureMatrixF32 = matrix::FeatureMatrix<f32>;
pub type TrainedModelF32 = ensemble::TrainedModel<f32>;
