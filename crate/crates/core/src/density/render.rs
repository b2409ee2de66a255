use super::{AnnotationSet, DensityMap, KernelSpec, SigmaRegistry};
use crate::error::{AsdError, Result};

/// How a stamped Gaussian is scaled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelMass {
    /// Rescaled so the truncated, in-image part sums to exactly 1.
    UnitInImage,
    /// The continuous normalization `1 / (2 pi sigma^2)`; truncated or clipped
    /// mass is lost.
    Continuous,
    /// Unnormalized, with the given value at the kernel centre.
    Peak(f64),
}

/// Adds one Gaussian centred at `(cx, cy)` into a row-major `height x width` buffer.
///
/// The kernel is evaluated at pixel centres `(x + 0.5, y + 0.5)` and truncated to
/// a disc of radius `truncation * sigma`. Returns the mass added.
#[allow(clippy::too_many_arguments)]
pub fn stamp_gaussian(
    buf: &mut [f64],
    height: usize,
    width: usize,
    cx: f64,
    cy: f64,
    sigma: f64,
    truncation: f64,
    mass: KernelMass,
) -> f64 {
    let radius = truncation * sigma;
    let r2 = radius * radius;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let x0 = (cx - radius - 0.5).floor().max(0.0) as usize;
    let y0 = (cy - radius - 0.5).floor().max(0.0) as usize;
    let x1 = ((cx + radius - 0.5).ceil().max(-1.0) + 1.0).min(width as f64) as usize;
    let y1 = ((cy + radius - 0.5).ceil().max(-1.0) + 1.0).min(height as f64) as usize;

    let mut weights = Vec::with_capacity(y1.saturating_sub(y0) * x1.saturating_sub(x0));
    let mut total = 0.0;
    for py in y0..y1 {
        let dy = py as f64 + 0.5 - cy;
        for px in x0..x1 {
            let dx = px as f64 + 0.5 - cx;
            let d2 = dx * dx + dy * dy;
            if d2 <= r2 {
                let v = (-d2 * inv).exp();
                total += v;
                weights.push((py * width + px, v));
            }
        }
    }
    let factor = match mass {
        KernelMass::UnitInImage if total > 0.0 => 1.0 / total,
        KernelMass::UnitInImage => 0.0,
        KernelMass::Continuous => inv / std::f64::consts::PI,
        KernelMass::Peak(p) => p,
    };
    for (idx, v) in weights {
        buf[idx] += v * factor;
    }
    total * factor
}

/// Sums one Gaussian per head.
///
/// Kernel widths come from the rule named by `spec.mode`. In adaptive mode an
/// image with a single head has no neighbours and falls back to `fixed_sigma`.
pub fn render_density(ann: &AnnotationSet, spec: &KernelSpec) -> Result<DensityMap> {
    ann.validate()?;
    spec.validate()?;
    let mut values = vec![0.0; ann.height * ann.width];
    if ann.points.is_empty() {
        return DensityMap::new(ann.height, ann.width, values);
    }
    let rule = SigmaRegistry::builtin().get(&spec.mode)?;
    let sigmas = match rule.sigmas(&ann.points, spec) {
        Ok(s) => s,
        Err(AsdError::Degenerate(_)) => vec![spec.fixed_sigma; ann.points.len()],
        Err(e) => return Err(e),
    };
    let mass = if spec.normalize_mass {
        KernelMass::UnitInImage
    } else {
        KernelMass::Continuous
    };
    for (p, &sigma) in ann.points.iter().zip(&sigmas) {
        stamp_gaussian(
            &mut values,
            ann.height,
            ann.width,
            p.0,
            p.1,
            sigma,
            spec.truncation_radius_sigmas,
            mass,
        );
    }
    DensityMap::new(ann.height, ann.width, values)
}

#[cfg(test)]
mod tests {
    use super::super::Point;
    use super::*;

    #[test]
    fn empty_annotation_is_zero_map() {
        let ann = AnnotationSet::new(8, 6, vec![]).unwrap();
        let map = render_density(&ann, &KernelSpec::default()).unwrap();
        assert_eq!((map.height(), map.width()), (6, 8));
        assert_eq!(map.count(), 0.0);
    }

    #[test]
    fn single_point_unit_mass() {
        let ann = AnnotationSet::new(64, 64, vec![Point(32.0, 32.0)]).unwrap();
        let map = render_density(&ann, &KernelSpec::fixed(3.0)).unwrap();
        assert!((map.count() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn corner_point_keeps_unit_mass() {
        let ann = AnnotationSet::new(64, 64, vec![Point(0.0, 0.0)]).unwrap();
        let map = render_density(&ann, &KernelSpec::fixed(15.0)).unwrap();
        assert!((map.count() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unnormalized_mode_loses_clipped_mass() {
        let ann = AnnotationSet::new(64, 64, vec![Point(0.0, 0.0)]).unwrap();
        let spec = KernelSpec {
            normalize_mass: false,
            ..KernelSpec::fixed(15.0)
        };
        let c = render_density(&ann, &spec).unwrap().count();
        // roughly a quarter of the kernel lands inside
        assert!(c > 0.2 && c < 0.3, "{c}");
    }

    #[test]
    fn unnormalized_interior_kernel_is_nearly_unit() {
        let ann = AnnotationSet::new(64, 64, vec![Point(32.0, 32.0)]).unwrap();
        let spec = KernelSpec {
            normalize_mass: false,
            truncation_radius_sigmas: 6.0,
            ..KernelSpec::fixed(4.0)
        };
        let c = render_density(&ann, &spec).unwrap().count();
        assert!((c - 1.0).abs() < 1e-4, "{c}");
    }

    #[test]
    fn peak_is_centre_value() {
        let mut buf = vec![0.0; 25];
        stamp_gaussian(&mut buf, 5, 5, 2.5, 2.5, 1.0, 3.0, KernelMass::Peak(0.7));
        assert!((buf[12] - 0.7).abs() < 1e-15);
        assert!(buf.iter().all(|&v| v <= 0.7));
    }

    #[test]
    fn lone_adaptive_point_uses_fixed_sigma() {
        let ann = AnnotationSet::new(64, 64, vec![Point(20.0, 20.0)]).unwrap();
        let adaptive = render_density(&ann, &KernelSpec::default()).unwrap();
        let fixed = render_density(&ann, &KernelSpec::fixed(15.0)).unwrap();
        assert_eq!(adaptive, fixed);
    }
}
