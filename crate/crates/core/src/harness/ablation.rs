use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{AsdConfig, AsdModel, FusionRegistry};
use crate::train::{evaluate, train, Sample, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub variant: String,
    pub bins: usize,
    pub mae: Option<f64>,
    pub mse: Option<f64>,
    /// Error message when training or evaluation failed.
    pub error: Option<String>,
}

impl AblationCell {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub cells: Vec<AblationCell>,
}

impl AblationTable {
    pub fn get(&self, variant: &str, bins: usize) -> Option<&AblationCell> {
        self.cells
            .iter()
            .find(|c| c.variant == variant && c.bins == bins)
    }

    /// `variant,bins,mae,mse,status` rows; failed cells leave the metrics empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["variant", "bins", "mae", "mse", "status"])?;
        for c in &self.cells {
            let num = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
            let status = match &c.error {
                None => "ok".to_string(),
                Some(e) => format!("failed: {e}"),
            };
            out.write_record([
                c.variant.clone(),
                c.bins.to_string(),
                num(c.mae),
                num(c.mse),
                status,
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// The (variant, bins) grid: variants that ignore the bin count get one cell at
/// the base config's bin count. Unknown variants still get a cell, which fails.
pub fn ablation_grid(
    base: &AsdConfig,
    variants: &[String],
    bins_list: &[usize],
) -> Vec<(String, usize)> {
    let registry = FusionRegistry::builtin();
    let mut grid = Vec::new();
    for v in variants {
        match registry.get(v) {
            Ok(s) if s.uses_bins() => grid.extend(bins_list.iter().map(|&b| (v.clone(), b))),
            _ => grid.push((v.clone(), base.bins)),
        }
    }
    grid
}

/// Trains a fresh model per cell from the same init seed and training schedule,
/// then reports training-set count errors. Cells run in parallel; a failing cell
/// is recorded and the rest continue.
pub fn run_ablation(
    dataset: &[Sample],
    base: &AsdConfig,
    train_cfg: &TrainConfig,
    model_seed: u64,
    variants: &[String],
    bins_list: &[usize],
) -> AblationTable {
    let cells = ablation_grid(base, variants, bins_list)
        .into_par_iter()
        .map(|(variant, bins)| {
            let result = run_cell(dataset, base, train_cfg, model_seed, &variant, bins);
            match result {
                Ok((mae, mse)) => AblationCell {
                    variant,
                    bins,
                    mae: Some(mae),
                    mse: Some(mse),
                    error: None,
                },
                Err(e) => AblationCell {
                    variant,
                    bins,
                    mae: None,
                    mse: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    AblationTable { cells }
}

fn run_cell(
    dataset: &[Sample],
    base: &AsdConfig,
    train_cfg: &TrainConfig,
    model_seed: u64,
    variant: &str,
    bins: usize,
) -> Result<(f64, f64)> {
    let cfg = AsdConfig {
        variant: variant.to_string(),
        bins,
        ..base.clone()
    };
    let mut model = AsdModel::build(cfg, model_seed)?;
    let schedule = TrainConfig {
        variant: None,
        bins: None,
        ..train_cfg.clone()
    };
    train(&mut model, dataset, &schedule)?;
    let m = evaluate(&model, dataset)?;
    Ok((m.mae, m.mse))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_expands_bins_only_for_discretized() {
        let base = AsdConfig::default();
        let variants: Vec<String> = ["dense_only", "discretized", "continuous", "nope"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let grid = ablation_grid(&base, &variants, &[2, 10]);
        let expected: Vec<(String, usize)> = [
            ("dense_only", 10),
            ("discretized", 2),
            ("discretized", 10),
            ("continuous", 10),
            ("nope", 10),
        ]
        .iter()
        .map(|(v, b)| (v.to_string(), *b))
        .collect();
        assert_eq!(grid, expected);
    }

    #[test]
    fn csv_marks_failures() {
        let table = AblationTable {
            cells: vec![
                AblationCell {
                    variant: "dense_only".into(),
                    bins: 10,
                    mae: Some(1.5),
                    mse: Some(2.0),
                    error: None,
                },
                AblationCell {
                    variant: "nope".into(),
                    bins: 10,
                    mae: None,
                    mse: None,
                    error: Some("unknown".into()),
                },
            ],
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "variant,bins,mae,mse,status");
        assert_eq!(lines[1], "dense_only,10,1.5e0,2e0,ok");
        assert_eq!(lines[2], "nope,10,,,failed: unknown");
    }
}
