use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::count_metrics;
use crate::density::DensityMap;
use crate::error::{dim_err, AsdError, Result};
use crate::model::AsdModel;
use crate::tensor::{Graph, Sgd, Tensor};

/// An image and its ground-truth density at the model's output resolution.
#[derive(Clone, Debug)]
pub struct Sample {
    pub image: Tensor,
    pub target: DensityMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Overrides the model's bin count when set.
    pub bins: Option<usize>,
    /// Overrides the model's fusion variant when set.
    pub variant: Option<String>,
    /// Write a checkpoint every this many epochs (CLI only).
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            momentum: 0.9,
            epochs: 100,
            seed: 0,
            shuffle: true,
            bins: None,
            variant: None,
            checkpoint_every: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(AsdError::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(AsdError::Config("epochs must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(AsdError::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.checkpoint_every == Some(0) {
            return Err(AsdError::Config("checkpoint_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-image loss over the epoch.
    pub loss: f64,
    pub mae: f64,
    pub mse: f64,
    /// Bin index of every image, in dataset order.
    pub bins: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// `epoch,loss,mae,mse` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "loss", "mae", "mse"])?;
        for r in &self.epochs {
            out.write_record([
                r.epoch.to_string(),
                format!("{:e}", r.loss),
                format!("{:e}", r.mae),
                format!("{:e}", r.mse),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn train(model: &mut AsdModel, dataset: &[Sample], cfg: &TrainConfig) -> Result<TrainLog> {
    train_with_hook(model, dataset, cfg, |_, _| Ok(()))
}

/// Full-image SGD with batch size 1. `hook` runs after every epoch.
pub fn train_with_hook<F>(
    model: &mut AsdModel,
    dataset: &[Sample],
    cfg: &TrainConfig,
    mut hook: F,
) -> Result<TrainLog>
where
    F: FnMut(&EpochRecord, &AsdModel) -> Result<()>,
{
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(AsdError::Argument(
            "training needs at least one sample".into(),
        ));
    }
    if cfg.bins.is_some() || cfg.variant.is_some() {
        let variant = cfg
            .variant
            .clone()
            .unwrap_or_else(|| model.config().variant.clone());
        let bins = cfg.bins.unwrap_or(model.config().bins);
        model.set_fusion(&variant, bins)?;
    }
    for (i, s) in dataset.iter().enumerate() {
        let sh = s.image.shape();
        if sh.len() != 3 {
            return dim_err(format!("sample {i}: image must be [1, H, W], got {sh:?}"));
        }
        let (h, w) = model.output_shape(sh[1], sh[2])?;
        if (h, w) != (s.target.height(), s.target.width()) {
            return dim_err(format!(
                "sample {i}: model outputs {h}x{w} but ground truth is {}x{}",
                s.target.height(),
                s.target.width()
            ));
        }
    }

    let targets: Vec<Tensor> = dataset.iter().map(|s| s.target.to_tensor()).collect();
    let truth: Vec<f64> = dataset.iter().map(|s| s.target.count()).collect();
    let mut opt = Sgd::new(cfg.lr, cfg.momentum)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut log = TrainLog::default();
    model.zero_grads();

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut predicted = vec![0.0; dataset.len()];
        let mut bins = vec![0; dataset.len()];
        for &i in &order {
            let mut g = Graph::new();
            let out = model.forward(&mut g, &dataset[i].image)?;
            let loss = g.density_mse(&[out.fused], &[&targets[i]])?;
            let value = g.scalar(loss);
            if !value.is_finite() {
                return Err(AsdError::Numerical(format!(
                    "epoch {epoch}, sample {i}: loss is {value}"
                )));
            }
            loss_sum += value;
            predicted[i] = g.value(out.fused).iter().sum();
            bins[i] = out.bin_index;
            g.backward(loss)?;
            model.accumulate_grads(&g, &out.params)?;
            opt.step(model.params_mut())?;
            if !model.all_finite() {
                return Err(AsdError::Numerical(format!(
                    "epoch {epoch}, sample {i}: parameters diverged (lr {})",
                    cfg.lr
                )));
            }
        }
        let metrics = count_metrics(&predicted, &truth)?;
        let record = EpochRecord {
            epoch,
            loss: loss_sum / dataset.len() as f64,
            mae: metrics.mae,
            mse: metrics.mse,
            bins,
        };
        hook(&record, model)?;
        log.epochs.push(record);
    }
    Ok(log)
}
