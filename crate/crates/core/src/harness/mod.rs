//! Synthetic data, dataset directories, scenario reports, the ablation driver,
//! the gradient-check registry, and the command implementations behind the CLI.

mod ablation;
pub mod commands;
mod config;
mod dataset;
pub mod gradcheck;
mod scenario;
mod synth;

pub use ablation::{ablation_grid, run_ablation, AblationCell, AblationTable};
pub use config::{AblationConfig, ExperimentConfig};
pub use dataset::{
    read_dataset, to_samples, write_dataset, DatasetItem, Manifest, ManifestEntry, MANIFEST,
};
pub use scenario::{scenario_report, ScenarioEntry, ScenarioReport};
pub use synth::{synth_dataset, Regime, SynthConfig, SynthImage};
