//! Model files: one pretty-printed JSON document per trained model.
//!
//! Reals are written with the shortest decimal that parses back to the same
//! value, so a reloaded model predicts bit-identically and re-saving produces
//! the same bytes.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    Algorithm, ErtModel, GbmModel, HyperParams, LgbmModel, ModelMetadata, ModelPayload, TrainedModel,
};
use crate::scalar::Scalar;
use crate::trees::{HistogramBins, RegressionTree};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("model schema_version {found} is not supported (expected {SCHEMA_VERSION})")]
    SchemaVersionMismatch { found: u64 },
    #[error("unknown algorithm tag `{0}`")]
    UnknownAlgorithmTag(String),
    #[error("malformed model document: {0}")]
    MalformedDocument(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(serialize = "T: Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
struct ModelDocument<T> {
    schema_version: u64,
    algorithm: Algorithm,
    feature_names: Vec<String>,
    params: HyperParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f0: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    learning_rate: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bins: Option<HistogramBins<T>>,
    trees: Vec<RegressionTree<T>>,
    metadata: ModelMetadata,
}

fn to_document<T: Scalar>(model: &TrainedModel<T>) -> ModelDocument<T> {
    let (f0, learning_rate, bins) = match &model.payload {
        ModelPayload::Gb(m) => (Some(m.f0), Some(m.learning_rate), None),
        ModelPayload::Ert(_) => (None, None, None),
        ModelPayload::Lgbm(m) => (Some(m.f0), Some(m.learning_rate), Some(m.bins.clone())),
    };
    ModelDocument {
        schema_version: SCHEMA_VERSION,
        algorithm: model.algorithm(),
        feature_names: model.payload.feature_names().to_vec(),
        params: model.payload.params(),
        f0,
        learning_rate,
        bins,
        trees: model.payload.trees().to_vec(),
        metadata: model.metadata.clone(),
    }
}

fn malformed(msg: impl Into<String>) -> PersistError {
    PersistError::MalformedDocument(msg.into())
}

fn from_document<T: Scalar>(doc: ModelDocument<T>) -> Result<TrainedModel<T>, PersistError> {
    if doc.params.algorithm() != doc.algorithm {
        return Err(malformed(format!("params do not belong to algorithm `{}`", doc.algorithm)));
    }
    let n_features = doc.feature_names.len();
    for tree in &doc.trees {
        if tree.max_feature_index().is_some_and(|f| f >= n_features) {
            return Err(malformed("split references an unknown feature"));
        }
        if !tree.leaf_values_finite() {
            return Err(malformed("non-finite leaf value"));
        }
    }
    let need = |v: Option<T>, field: &str| v.ok_or_else(|| malformed(format!("missing `{field}`")));
    let payload = match doc.params {
        HyperParams::Gb(params) => ModelPayload::Gb(GbmModel {
            params,
            f0: need(doc.f0, "f0")?,
            learning_rate: need(doc.learning_rate, "learning_rate")?,
            trees: doc.trees,
            feature_names: doc.feature_names,
        }),
        HyperParams::Ert(params) => {
            if doc.trees.is_empty() {
                return Err(malformed("ert model without trees"));
            }
            ModelPayload::Ert(ErtModel {
                params,
                trees: doc.trees,
                feature_names: doc.feature_names,
            })
        }
        HyperParams::Lgbm(params) => {
            let bins = doc.bins.ok_or_else(|| malformed("missing `bins`"))?;
            if bins.edges.len() != n_features {
                return Err(malformed("bins do not match feature count"));
            }
            ModelPayload::Lgbm(LgbmModel {
                params,
                f0: need(doc.f0, "f0")?,
                learning_rate: need(doc.learning_rate, "learning_rate")?,
                bins,
                trees: doc.trees,
                feature_names: doc.feature_names,
            })
        }
    };
    Ok(TrainedModel {
        payload,
        metadata: doc.metadata,
    })
}

pub fn save_model<T: Scalar + Serialize, W: Write>(model: &TrainedModel<T>, mut sink: W) -> Result<(), PersistError> {
    serde_json::to_writer_pretty(&mut sink, &to_document(model)).map_err(|e| PersistError::Io(e.into()))?;
    sink.write_all(b"\n")?;
    Ok(())
}

pub fn save_model_to_string<T: Scalar + Serialize>(model: &TrainedModel<T>) -> String {
    let mut buf = Vec::new();
    save_model(model, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Reads a document written by [`save_model`]. The version and algorithm tag
/// are checked before the body so that newer files fail with a precise error.
pub fn load_model<T: Scalar + DeserializeOwned, R: Read>(source: R) -> Result<TrainedModel<T>, PersistError> {
    let mut de = serde_json::Deserializer::from_reader(source);
    de.disable_recursion_limit();
    let value = serde_json::Value::deserialize(&mut de).map_err(|e| {
        if e.is_io() {
            PersistError::Io(e.into())
        } else {
            malformed(e.to_string())
        }
    })?;
    de.end().map_err(|e| malformed(e.to_string()))?;

    let obj = value.as_object().ok_or_else(|| malformed("document is not an object"))?;
    let version = obj
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| malformed("missing integer `schema_version`"))?;
    if version != SCHEMA_VERSION {
        return Err(PersistError::SchemaVersionMismatch { found: version });
    }
    let tag = obj
        .get("algorithm")
        .and_then(serde_json::Value::as_str)
        .ok_or_else(|| malformed("missing string `algorithm`"))?;
    if Algorithm::from_tag(tag).is_none() {
        return Err(PersistError::UnknownAlgorithmTag(tag.to_string()));
    }
    let doc: ModelDocument<T> = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
    from_document(doc)
}
