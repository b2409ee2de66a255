use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::density::KernelSpec;
use crate::error::{AsdError, Result};
use crate::model::{AsdConfig, FusionRegistry};
use crate::train::TrainConfig;

/// Config file shared by `train` and `ablate`. Missing sections take their defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub model: AsdConfig,
    pub train: TrainConfig,
    pub kernel: KernelSpec,
    pub ablation: AblationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub variants: Vec<String>,
    /// Bin counts tried for variants whose output depends on the bin count.
    pub bins: Vec<usize>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            variants: FusionRegistry::builtin()
                .names()
                .iter()
                .map(|s| s.to_string())
                .collect(),
            bins: vec![2, 10, 100, 1000],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            AsdError::Argument(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.kernel.validate()?;
        if self.ablation.variants.is_empty() || self.ablation.bins.is_empty() {
            return Err(AsdError::Config(
                "ablation needs at least one variant and one bin count".into(),
            ));
        }
        Ok(())
    }
}
