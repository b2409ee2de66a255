//! The two-pathway counting network.
//!
//! ```text
//!                   +-> deconv x2 -> k x k convs -> max pool -> 1x1 ------+
//! image -> backbone +-> 3x3 convs -> 1x1 ---------------------------------+-> fusion -> density
//!                   +-> global avg pool -> fc -> relu -> fc -> w          |
//!                                w -> normalize -> discretize ------------+
//! ```
//!
//! The fusion step is chosen by name from the [`FusionRegistry`].

mod checkpoint;
pub mod fusion;
mod network;
mod response;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use fusion::{FusionInputs, FusionRegistry, FusionStrategy};
pub use network::{AsdModel, ForwardOutput, Prediction};
pub use response::{discretize, normalize_response, Discretized};

use crate::error::{AsdError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AsdConfig {
    /// Output channels of each 3x3 conv + ReLU block of the backbone.
    pub backbone_channels: Vec<usize>,
    /// Number of 2x2 max pools; one follows each of the first `backbone_pools` blocks.
    pub backbone_pools: usize,
    pub dense_kernel: usize,
    pub dense_layers: usize,
    pub sparse_layers: usize,
    pub pathway_channels: usize,
    pub adaption_hidden: usize,
    pub bins: usize,
    /// Name of a registered fusion strategy.
    pub variant: String,
    /// The gate weights the dense map when true, the sparse map otherwise.
    pub dense_first: bool,
    pub init: InitScheme,
    /// Weight standard deviation under [`InitScheme::Gaussian`].
    pub init_std: f64,
}

/// How weights are drawn at build time; biases always start at zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Gaussian(0, `init_std`) for every weight.
    Gaussian,
    /// Gaussian(0, sqrt(2 / fan_in)) per layer.
    #[default]
    He,
}

impl Default for AsdConfig {
    fn default() -> Self {
        Self {
            backbone_channels: vec![8, 16],
            backbone_pools: 1,
            dense_kernel: 5,
            dense_layers: 2,
            sparse_layers: 2,
            pathway_channels: 8,
            adaption_hidden: 8,
            bins: 10,
            variant: "discretized".to_string(),
            dense_first: true,
            init: InitScheme::He,
            init_std: 0.01,
        }
    }
}

impl AsdConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(AsdError::Config(msg));
        if self.backbone_channels.is_empty() || self.backbone_channels.contains(&0) {
            return fail(format!(
                "backbone_channels must be non-empty and positive, got {:?}",
                self.backbone_channels
            ));
        }
        if self.backbone_pools > self.backbone_channels.len() {
            return fail(format!(
                "{} pools need at least as many backbone blocks, got {}",
                self.backbone_pools,
                self.backbone_channels.len()
            ));
        }
        if self.dense_kernel < 5 || self.dense_kernel.is_multiple_of(2) {
            return fail(format!(
                "dense_kernel must be odd and >= 5, got {}",
                self.dense_kernel
            ));
        }
        for (name, v) in [
            ("dense_layers", self.dense_layers),
            ("sparse_layers", self.sparse_layers),
            ("pathway_channels", self.pathway_channels),
            ("adaption_hidden", self.adaption_hidden),
            ("bins", self.bins),
        ] {
            if v == 0 {
                return fail(format!("{name} must be >= 1"));
            }
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return fail(format!("init_std must be > 0, got {}", self.init_std));
        }
        FusionRegistry::builtin().get(&self.variant)?;
        Ok(())
    }

    /// Spatial downsampling between image and density output.
    pub fn output_stride(&self) -> usize {
        1 << self.backbone_pools
    }
}
