//! Ground-truth density maps from head annotations.
//!
//! Each annotated head contributes one Gaussian kernel. Kernel widths come from
//! a [`SigmaRule`] picked by name: `geometry_adaptive` scales with the mean
//! distance to the k nearest heads, `fixed` uses one width for every head.

mod io;
mod knn;
mod render;
mod sigma;

use serde::{Deserialize, Serialize};

pub use io::{read_annotations, read_dmap, write_annotations, write_csv, write_dmap, write_pgm};
pub use knn::knn_mean_distance;
pub use render::{render_density, stamp_gaussian, KernelMass};
pub use sigma::{AdaptiveSigma, FixedSigma, SigmaRegistry, SigmaRule};

use crate::error::{dim_err, AsdError, Result};
use crate::tensor::Tensor;

/// A head position in pixel coordinates: origin top-left, x rightward, y downward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point(pub f64, pub f64);

impl Point {
    pub fn x(&self) -> f64 {
        self.0
    }

    pub fn y(&self) -> f64 {
        self.1
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.0 - other.0).hypot(self.1 - other.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub width: usize,
    pub height: usize,
    pub points: Vec<Point>,
}

impl AnnotationSet {
    pub fn new(width: usize, height: usize, points: Vec<Point>) -> Result<Self> {
        let ann = Self {
            width,
            height,
            points,
        };
        ann.validate()?;
        Ok(ann)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return dim_err(format!(
                "annotation image must be non-empty, got {}x{}",
                self.width, self.height
            ));
        }
        for (i, p) in self.points.iter().enumerate() {
            let inside = p.0.is_finite()
                && p.1.is_finite()
                && p.0 >= 0.0
                && p.1 >= 0.0
                && p.0 < self.width as f64
                && p.1 < self.height as f64;
            if !inside {
                return Err(AsdError::Dimension(format!(
                    "point {i} at ({}, {}) lies outside the {}x{} image",
                    p.0, p.1, self.width, self.height
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Kernel configuration for [`render_density`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelSpec {
    /// Name of a registered [`SigmaRule`].
    pub mode: String,
    pub beta: f64,
    pub k: usize,
    pub fixed_sigma: f64,
    pub truncation_radius_sigmas: f64,
    pub normalize_mass: bool,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            mode: AdaptiveSigma::NAME.to_string(),
            beta: 0.3,
            k: 3,
            fixed_sigma: 15.0,
            truncation_radius_sigmas: 3.0,
            normalize_mass: true,
            sigma_min: 1.0,
            sigma_max: 50.0,
        }
    }
}

impl KernelSpec {
    pub fn adaptive(beta: f64, k: usize) -> Self {
        Self {
            beta,
            k,
            ..Self::default()
        }
    }

    pub fn fixed(sigma: f64) -> Self {
        Self {
            mode: FixedSigma::NAME.to_string(),
            fixed_sigma: sigma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.beta) {
            return Err(AsdError::Config(format!(
                "beta must be > 0, got {}",
                self.beta
            )));
        }
        if self.k < 1 {
            return Err(AsdError::Config("k must be >= 1".into()));
        }
        if !positive(self.fixed_sigma) {
            return Err(AsdError::Config(format!(
                "fixed_sigma must be > 0, got {}",
                self.fixed_sigma
            )));
        }
        if !positive(self.truncation_radius_sigmas) {
            return Err(AsdError::Config(
                "truncation_radius_sigmas must be > 0".into(),
            ));
        }
        if !(positive(self.sigma_min) && self.sigma_min <= self.sigma_max) {
            return Err(AsdError::Config(format!(
                "sigma clamp [{}, {}] is not a valid interval",
                self.sigma_min, self.sigma_max
            )));
        }
        SigmaRegistry::builtin().get(&self.mode)?;
        Ok(())
    }
}

/// Non-negative raster whose sum is a crowd count.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl DensityMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return dim_err(format!(
                "density map {height}x{width} cannot hold {} values",
                values.len()
            ));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(AsdError::Numerical(format!(
                "density values must be finite and >= 0, found {v}"
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0.0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn count(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `[1, H, W]` tensor view, as consumed by the loss.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![1, self.height, self.width], self.values.clone())
            .expect("validated extents")
    }

    /// Sums each `factor x factor` block, preserving the total count.
    pub fn sum_pool_resample(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.height.is_multiple_of(factor) || !self.width.is_multiple_of(factor)
        {
            return dim_err(format!(
                "factor {factor} does not divide the {}x{} map",
                self.height, self.width
            ));
        }
        let (h, w) = (self.height / factor, self.width / factor);
        let mut out = vec![0.0; h * w];
        for y in 0..self.height {
            let row = &self.values[y * self.width..(y + 1) * self.width];
            let dst = &mut out[(y / factor) * w..(y / factor + 1) * w];
            for (x, v) in row.iter().enumerate() {
                dst[x / factor] += v;
            }
        }
        Self::new(h, w, out)
    }
}
