//! Run configuration: a profile's defaults, overlaid by a JSON file, then by
//! command-line flags.
//!
//! ```json
//! {
//!   "profile": "desk",
//!   "paths": { "train": "train.conllu", "dev": "dev.conllu", "model": "out.model" },
//!   "model": { "lstm_hidden": 128 },
//!   "training": { "max_epochs": 30, "cycle_k": 3, "seed": 94 },
//!   "self_train": false
//! }
//! ```
//!
//! Every key is optional; unknown keys are rejected. `model` accepts any
//! field of the network configuration and `training` any field of the
//! training configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use udparse_core::config::{ModelConfig, TrainConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Full-size dimensions and schedule.
    Paper,
    /// Small dimensions, 500-word batches, 50 epochs.
    Desk,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub raw: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Where self-training writes the automatically annotated corpus.
    pub silver: Option<PathBuf>,
    /// JSON-lines training log.
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Profile,
    pub paths: Paths,
    pub model: ModelConfig,
    pub training: TrainConfig,
    pub self_train: bool,
}

impl RunConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let (model, training) = match profile {
            Profile::Paper => (ModelConfig::paper(), TrainConfig::paper()),
            Profile::Desk => (ModelConfig::desk(), TrainConfig::desk()),
        };
        RunConfig {
            profile,
            paths: Paths::default(),
            model,
            training,
            self_train: false,
        }
    }

    /// Parses a JSON document over the defaults of its `profile` (or of
    /// `fallback` when the document names none).
    pub fn from_json(text: &str, fallback: Profile) -> Result<Self> {
        let user: Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if !user.is_object() {
            return Err(CliError::Config("top level must be an object".into()));
        }
        let profile = match user.get("profile") {
            Some(p) => serde_json::from_value(p.clone()).map_err(|e| CliError::Config(format!("profile: {}", e)))?,
            None => fallback,
        };
        let mut merged = serde_json::to_value(Self::for_profile(profile)).expect("config serializes");
        overlay(&mut merged, user);
        serde_json::from_value(merged).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path, fallback: Profile) -> Result<Self> {
        Self::from_json(&crate::io::read_text(path)?, fallback)
    }
}

/// Recursive merge; objects merge key by key, anything else replaces.
fn overlay(base: &mut Value, user: Value) {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, u) => *b = u,
    }
}
