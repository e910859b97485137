//! On-disk model files written by `train` and read by `rollout` and
//! `evaluate`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use lcroll_core::baselines::StaticForestModel;
use lcroll_core::data::{NormalizationRecord, SplitSpec};
use lcroll_core::rollout::{windowed_forest_predictor, WindowedForestPredictor};
use lcroll_core::vrnn::{VrnnModel, VrnnTrainConfig};
use lcroll_core::forest::ForestTrainConfig;

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum ModelPayload {
    Vrnn(VrnnModel<f64>),
    /// Windowed forest rolled out one step at a time.
    Windowed(WindowedForestPredictor<f64>),
    /// Forest over `[θ, t]`.
    Static(StaticForestModel<f64>),
}

impl ModelPayload {
    pub fn default_name(&self) -> String {
        match self {
            ModelPayload::Vrnn(_) => "VRNN".to_string(),
            ModelPayload::Windowed(p) => format!("RF {}", p.window),
            ModelPayload::Static(_) => "RF-B".to_string(),
        }
    }

    pub fn config_dim(&self) -> usize {
        match self {
            ModelPayload::Vrnn(m) => m.config_dim,
            ModelPayload::Windowed(p) => p.config_dim,
            ModelPayload::Static(s) => s.config_dim(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ModelPayload::Vrnn(m) => m.validate()?,
            ModelPayload::Windowed(p) => {
                let rebuilt = windowed_forest_predictor(p.forest.clone(), p.window)?;
                if rebuilt.config_dim != p.config_dim {
                    bail!("forest width does not match window {} and config dimension {}", p.window, p.config_dim);
                }
                p.forest.validate()?;
            }
            ModelPayload::Static(s) => s.validate()?,
        }
        Ok(())
    }
}

/// Training settings, recorded for reproduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "trainer", rename_all = "snake_case")]
pub enum TrainerRecord {
    Forest(ForestTrainConfig),
    Vrnn(VrnnTrainConfig),
}

/// Which dataset the model saw and how it was split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedOn {
    pub dataset: String,
    pub sha256: String,
    pub split: SplitSpec,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(flatten)]
    pub payload: ModelPayload,
    pub normalization: NormalizationRecord<f64>,
    pub trained_on: TrainedOn,
    pub trainer: TrainerRecord,
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read model file {}", path.display()))?;
        let file: ModelFile =
            serde_json::from_str(&text).with_context(|| format!("{} is not a valid model file", path.display()))?;
        if file.format_version != MODEL_FILE_VERSION {
            bail!(
                "{}: unsupported model file version {} (expected {MODEL_FILE_VERSION})",
                path.display(),
                file.format_version
            );
        }
        file.payload
            .validate()
            .with_context(|| format!("{} holds an inconsistent model", path.display()))?;
        Ok(file)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}
