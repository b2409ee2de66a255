use std::f64::consts::PI;

use crate::error::{AsdError, Result};
use crate::tensor::graph_sigmoid;

/// `arctan(sigmoid(w)) * 2 / pi`.
///
/// Since `sigmoid(w) < 1`, the result lies in `(0, 0.5)`: only the lower half of
/// `[0, 1)` is reachable. In `f64` the sigmoid rounds to 1 beyond `w ~ 37`, where
/// the response reaches exactly 0.5.
pub fn normalize_response(w_raw: f64) -> f64 {
    graph_sigmoid(w_raw).atan() * 2.0 / PI
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Discretized {
    pub bin_index: usize,
    /// Centre of the bin.
    pub w_disc: f64,
}

/// Splits `[0, 1)` into `bins` equal bins and snaps `w_star` to its bin centre.
pub fn discretize(w_star: f64, bins: usize) -> Result<Discretized> {
    if bins == 0 {
        return Err(AsdError::Argument("bins must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&w_star) {
        return Err(AsdError::Argument(format!(
            "response {w_star} lies outside [0, 1)"
        )));
    }
    let bin_index = ((w_star * bins as f64).floor() as usize).min(bins - 1);
    Ok(Discretized {
        bin_index,
        w_disc: (bin_index as f64 + 0.5) / bins as f64,
    })
}
