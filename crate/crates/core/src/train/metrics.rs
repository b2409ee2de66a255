use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Sample;
use crate::error::{AsdError, Result};
use crate::model::AsdModel;

/// Mean absolute count error and root mean squared count error.
///
/// The second field is called `mse` to match how crowd-counting results are
/// reported, but it is the square root of the mean squared error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountMetrics {
    pub mae: f64,
    pub mse: f64,
}

pub fn count_metrics(predicted: &[f64], truth: &[f64]) -> Result<CountMetrics> {
    if predicted.is_empty() || predicted.len() != truth.len() {
        return Err(AsdError::Argument(format!(
            "need matching, non-empty count lists, got {} and {}",
            predicted.len(),
            truth.len()
        )));
    }
    let n = predicted.len() as f64;
    let (abs, sq) = predicted
        .iter()
        .zip(truth)
        .fold((0.0, 0.0), |(a, s), (p, t)| {
            (a + (p - t).abs(), s + (p - t) * (p - t))
        });
    Ok(CountMetrics {
        mae: abs / n,
        mse: (sq / n).sqrt(),
    })
}

/// Predicted counts in dataset order. Images are processed in parallel.
pub fn predict_counts(model: &AsdModel, dataset: &[Sample]) -> Result<Vec<f64>> {
    dataset
        .par_iter()
        .map(|s| model.predict(&s.image).map(|p| p.count()))
        .collect()
}

pub fn evaluate(model: &AsdModel, dataset: &[Sample]) -> Result<CountMetrics> {
    if dataset.is_empty() {
        return Err(AsdError::Argument(
            "cannot evaluate an empty dataset".into(),
        ));
    }
    let predicted = predict_counts(model, dataset)?;
    let truth: Vec<f64> = dataset.iter().map(|s| s.target.count()).collect();
    count_metrics(&predicted, &truth)
}
