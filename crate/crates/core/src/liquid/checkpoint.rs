use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ArchConfig, LiquidModel, ModelKind};
use super::params::TensorRecord;
use super::train::TrainConfig;
use super::wiring::NcpWiring;
use super::{LiquidError, Result};
use crate::dsp::ZScoreStats;
use crate::Real;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Normalization frozen at training time, applied to inputs and inverted on outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalizer {
    pub features: Vec<ZScoreStats<f64>>,
    pub target: ZScoreStats<f64>,
}

/// Everything needed to rebuild a trained model bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: ModelKind,
    pub n_features: usize,
    pub seed: u64,
    pub arch: ArchConfig,
    #[serde(default)]
    pub wiring: Option<NcpWiring>,
    pub tensors: Vec<TensorRecord>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub best_val_rmse: Option<f64>,
    #[serde(default)]
    pub feature_names: Vec<String>,
    #[serde(default)]
    pub normalizer: Option<Normalizer>,
}

impl Checkpoint {
    pub fn from_model<T: Real>(model: &LiquidModel<T>) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            kind: model.kind(),
            n_features: model.n_features(),
            seed: model.seed(),
            arch: model.config().clone(),
            wiring: model.wiring().cloned(),
            tensors: model.params().to_records(),
            train: None,
            best_val_rmse: None,
            feature_names: Vec::new(),
            normalizer: None,
        }
    }

    pub fn to_model<T: Real>(&self) -> Result<LiquidModel<T>> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(LiquidError::Format(format!("unsupported format version {}", self.format_version)));
        }
        let mut model = match (&self.wiring, self.kind.is_liquid()) {
            (Some(w), true) => LiquidModel::with_wiring(self.kind, w.clone(), self.arch.clone(), self.seed)?,
            (None, false) => LiquidModel::baseline(self.kind, self.n_features, self.arch.clone(), self.seed)?,
            _ => return Err(LiquidError::Format(format!("wiring presence does not match kind {}", self.kind))),
        };
        if model.n_features() != self.n_features {
            return Err(LiquidError::Format("feature count does not match the wiring".into()));
        }
        model.params_mut().load_records(&self.tensors)?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
