use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AsdError, Result};
use crate::model::AsdModel;
use crate::train::Sample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub id: String,
    pub w_star: f64,
    pub bin_index: usize,
    pub gt_count: f64,
    pub pred_count: f64,
}

/// Which images the gate sends to which bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub bins: usize,
    pub images: Vec<ScenarioEntry>,
    /// Image ids per occupied bin.
    pub members: BTreeMap<usize, Vec<String>>,
    pub occupied_bin_count: usize,
}

impl ScenarioReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Bin index of every image, in dataset order.
    pub fn bin_indices(&self) -> Vec<usize> {
        self.images.iter().map(|e| e.bin_index).collect()
    }
}

/// Runs the gate over every image with `bins` bins. Only the bin count changes;
/// the model's parameters and variant are kept.
pub fn scenario_report(
    model: &AsdModel,
    ids: &[String],
    samples: &[Sample],
    bins: usize,
) -> Result<ScenarioReport> {
    if ids.len() != samples.len() || samples.is_empty() {
        return Err(AsdError::Argument(format!(
            "need one id per sample and at least one sample, got {} ids for {} samples",
            ids.len(),
            samples.len()
        )));
    }
    let mut model = model.clone();
    let variant = model.config().variant.clone();
    model.set_fusion(&variant, bins)?;
    let images = ids
        .par_iter()
        .zip(samples)
        .map(|(id, s)| {
            let p = model.predict(&s.image)?;
            Ok(ScenarioEntry {
                id: id.clone(),
                w_star: p.w_star,
                bin_index: p.bin_index,
                gt_count: s.target.count(),
                pred_count: p.count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut members: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for e in &images {
        members.entry(e.bin_index).or_default().push(e.id.clone());
    }
    Ok(ScenarioReport {
        bins,
        occupied_bin_count: members.len(),
        images,
        members,
    })
}
