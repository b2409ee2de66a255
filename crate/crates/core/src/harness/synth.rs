use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{stamp_gaussian, AnnotationSet, KernelMass, Point};
use crate::error::{AsdError, Result};
use crate::tensor::Tensor;

/// One crowd regime: head count drawn uniformly from `count_range` (inclusive).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub count_range: (usize, usize),
    pub blob_sigma: f64,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_images: usize,
    pub width: usize,
    pub height: usize,
    pub regimes: Vec<Regime>,
    pub seed: u64,
    /// Upper bound of the uniform pixel noise.
    pub noise: f64,
    /// Value of a blob at its centre.
    pub blob_peak: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_images: 8,
            width: 64,
            height: 64,
            regimes: vec![Regime {
                count_range: (10, 60),
                blob_sigma: 1.5,
                fraction: 1.0,
            }],
            seed: 0,
            noise: 0.05,
            blob_peak: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(AsdError::Config(m));
        if self.width == 0 || self.height == 0 {
            return fail("image extents must be positive".into());
        }
        if self.regimes.is_empty() {
            return fail("at least one regime is required".into());
        }
        let total: f64 = self.regimes.iter().map(|r| r.fraction).sum();
        if (total - 1.0).abs() > 1e-9 {
            return fail(format!("regime fractions sum to {total}, expected 1"));
        }
        for r in &self.regimes {
            if r.count_range.0 > r.count_range.1 {
                return fail(format!("count range {:?} is empty", r.count_range));
            }
            if !(r.fraction >= 0.0 && r.blob_sigma > 0.0) {
                return fail(format!("bad regime {r:?}"));
            }
        }
        if !(self.noise >= 0.0 && self.blob_peak > 0.0) {
            return fail("noise must be >= 0 and blob_peak > 0".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthImage {
    /// `[1, H, W]` with values in `[0, 1]`.
    pub image: Tensor,
    pub annotations: AnnotationSet,
    pub regime: usize,
}

/// Scatters heads per regime and renders each as a Gaussian blob plus uniform noise.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<Vec<SynthImage>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w, h) = (cfg.width, cfg.height);
    let mut out = Vec::with_capacity(cfg.num_images);
    for _ in 0..cfg.num_images {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut regime = cfg.regimes.len() - 1;
        for (i, r) in cfg.regimes.iter().enumerate() {
            acc += r.fraction;
            if u < acc {
                regime = i;
                break;
            }
        }
        let r = &cfg.regimes[regime];
        let n = rng.gen_range(r.count_range.0..=r.count_range.1);
        let mut points = Vec::with_capacity(n);
        while points.len() < n {
            let p = Point(rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64));
            if p.0 < w as f64 && p.1 < h as f64 {
                points.push(p);
            }
        }
        let mut pixels = vec![0.0; w * h];
        for p in &points {
            stamp_gaussian(
                &mut pixels,
                h,
                w,
                p.0,
                p.1,
                r.blob_sigma,
                3.0,
                KernelMass::Peak(cfg.blob_peak),
            );
        }
        for v in pixels.iter_mut() {
            *v = (*v + rng.gen_range(0.0..=cfg.noise)).clamp(0.0, 1.0);
        }
        out.push(SynthImage {
            image: Tensor::new(vec![1, h, w], pixels)?,
            annotations: AnnotationSet::new(w, h, points)?,
            regime,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_count_range() {
        let cfg = SynthConfig {
            num_images: 5,
            regimes: vec![Regime {
                count_range: (5, 5),
                blob_sigma: 1.0,
                fraction: 1.0,
            }],
            ..SynthConfig::default()
        };
        for item in synth_dataset(&cfg).unwrap() {
            assert_eq!(item.annotations.len(), 5);
            assert!(item.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig::default();
        assert_eq!(synth_dataset(&cfg).unwrap(), synth_dataset(&cfg).unwrap());
        let other = SynthConfig {
            seed: 1,
            ..cfg.clone()
        };
        assert_ne!(synth_dataset(&cfg).unwrap(), synth_dataset(&other).unwrap());
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let cfg = SynthConfig {
            regimes: vec![Regime {
                count_range: (1, 2),
                blob_sigma: 1.0,
                fraction: 0.5,
            }],
            ..SynthConfig::default()
        };
        assert!(matches!(synth_dataset(&cfg), Err(AsdError::Config(_))));
    }
}
