//! Versioned JSON model files.
//!
//! Layout (`schema_version` 1):
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "forest": {
//!     "predictors": [names...],
//!     "config": {"n_trees", "mtry", "min_node_size", "seed", "bootstrap"},
//!     "mtry": resolved mtry,
//!     "n_train": training rows,
//!     "trees": [{"tree": {"nodes": [
//!          {"kind": "split", "feature", "threshold", "left", "right"} |
//!          {"kind": "leaf", "value"}]},
//!        "in_bag": [row indices], "oob": [row indices]}],
//!     "tuning": null | {"best_mtry", "records": [{"mtry", "rmse", "fold_mean_rmse"}]}
//!   }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AoaError, Result};
use crate::forest::TrainedForest;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct ModelFileRef<'a> {
    schema_version: u32,
    forest: &'a TrainedForest,
}

#[derive(Deserialize)]
struct ModelFile {
    schema_version: u32,
    forest: TrainedForest,
}

pub fn model_to_json(forest: &TrainedForest) -> Result<String> {
    Ok(serde_json::to_string(&ModelFileRef {
        schema_version: MODEL_SCHEMA_VERSION,
        forest,
    })?)
}

pub fn model_from_json(text: &str) -> Result<TrainedForest> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.schema_version != MODEL_SCHEMA_VERSION {
        return Err(AoaError::invalid(format!(
            "unsupported model schema version {} (expected {MODEL_SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    file.forest.validate()?;
    Ok(file.forest)
}

pub fn write_model(forest: &TrainedForest, path: &Path) -> Result<()> {
    super::write_atomic(path, model_to_json(forest)?.as_bytes())
}

pub fn read_model(path: &Path) -> Result<TrainedForest> {
    model_from_json(&super::read_text(path)?)
}
