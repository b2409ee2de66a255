//! Central finite differences against the autodiff graph.
//!
//! Relative error per coordinate is `|a - b| / max(|a|, |b|, 1e-8)`; checks report
//! the maximum over all coordinates of all inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConvGeometry, Graph, Tensor, Var};
use crate::error::Result;

pub const DEFAULT_STEP: f64 = 1e-4;
pub const OP_TOLERANCE: f64 = 1e-4;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Checks a scalar function of one tensor.
pub fn finite_diff_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    finite_diff_check_many(|g, vars| f(g, vars[0]), std::slice::from_ref(x), h)
}

/// Checks a scalar function of several tensors, perturbing every coordinate of
/// every input.
pub fn finite_diff_check_many<F>(f: F, xs: &[Tensor], h: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    check_impl(f, xs, h, false)
}

/// Like [`finite_diff_check_many`] for piecewise smooth functions: a coordinate
/// within `h` of a ReLU or max-pool kink only agrees with the difference taken
/// on its own side, so each coordinate is scored against the best of the
/// central and both one-sided differences. One-sided steps are `h / 100`,
/// which keeps their truncation error well below the central one.
pub fn finite_diff_check_piecewise<F>(f: F, xs: &[Tensor], h: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    check_impl(f, xs, h, true)
}

fn check_impl<F>(f: F, xs: &[Tensor], h: f64, one_sided: bool) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let analytic = {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.param(x)).collect();
        let loss = f(&mut g, &vars)?;
        g.backward(loss)?;
        vars.iter()
            .zip(xs)
            .map(|(&v, x)| {
                g.grad(v)
                    .map_or_else(|| vec![0.0; x.numel()], <[f64]>::to_vec)
            })
            .collect::<Vec<_>>()
    };

    let eval = |inputs: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|x| g.constant(x)).collect();
        let out = f(&mut g, &vars)?;
        Ok(g.scalar(out))
    };

    let center = if one_sided { eval(xs)? } else { 0.0 };
    let mut worst: f64 = 0.0;
    let mut probe = xs.to_vec();
    for (t, grads) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let orig = xs[t].data()[i];
            probe[t].data_mut()[i] = orig + h;
            let plus = eval(&probe)?;
            probe[t].data_mut()[i] = orig - h;
            let minus = eval(&probe)?;
            probe[t].data_mut()[i] = orig;
            let mut err = relative_error(a, (plus - minus) / (2.0 * h));
            if one_sided {
                let s = h / 100.0;
                probe[t].data_mut()[i] = orig + s;
                let right = (eval(&probe)? - center) / s;
                probe[t].data_mut()[i] = orig - s;
                let left = (center - eval(&probe)?) / s;
                probe[t].data_mut()[i] = orig;
                err = err
                    .min(relative_error(a, right))
                    .min(relative_error(a, left));
            }
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

/// A named gradient check that can be run from a seed.
pub trait GradCheck: Send + Sync {
    fn name(&self) -> &str;

    fn tolerance(&self) -> f64 {
        OP_TOLERANCE
    }

    /// Returns the maximum relative error.
    fn run(&self, seed: u64) -> Result<f64>;
}

pub(crate) fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(shape, data).expect("shape is non-empty")
}

/// Uniform values bounded away from zero, for checks through kinks at 0.
fn random_away_from_zero(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let mag = rng.gen_range(0.05..1.0);
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    Tensor::new(shape, data).expect("shape is non-empty")
}

/// Projects a node onto a fixed random direction so every output coordinate
/// contributes to the scalar being differentiated.
pub fn project(g: &mut Graph, v: Var, direction: &Tensor) -> Result<Var> {
    let d = g.constant(direction);
    let prod = g.mul(v, d)?;
    Ok(g.sum(prod))
}

type CheckFn = fn(&mut Graph, &[Var]) -> Result<Var>;

/// One operation checked with respect to all of its inputs.
pub struct OpCheck {
    name: &'static str,
    shapes: Vec<Vec<usize>>,
    out_shape: Vec<usize>,
    away_from_zero: bool,
    build: CheckFn,
}

impl GradCheck for OpCheck {
    fn name(&self) -> &str {
        self.name
    }

    fn run(&self, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<Tensor> = self
            .shapes
            .iter()
            .map(|s| {
                if self.away_from_zero {
                    random_away_from_zero(&mut rng, s.clone())
                } else {
                    random_tensor(&mut rng, s.clone())
                }
            })
            .collect();
        let direction = random_tensor(&mut rng, self.out_shape.clone());
        let build = self.build;
        finite_diff_check_many(
            |g, vars| {
                let out = build(g, vars)?;
                project(g, out, &direction)
            },
            &inputs,
            DEFAULT_STEP,
        )
    }
}

/// Checks for every differentiable primitive of the graph.
pub fn op_checks() -> Vec<OpCheck> {
    let check = |name, shapes: Vec<Vec<usize>>, out_shape: Vec<usize>, build: CheckFn| OpCheck {
        name,
        shapes,
        out_shape,
        away_from_zero: false,
        build,
    };
    vec![
        check(
            "conv2d",
            vec![vec![2, 5, 5], vec![3, 2, 3, 3], vec![3]],
            vec![3, 5, 5],
            |g, v| g.conv2d(v[0], v[1], v[2], ConvGeometry::same(3)),
        ),
        check(
            "conv2d_strided_dilated",
            vec![vec![2, 7, 7], vec![2, 2, 3, 3], vec![2]],
            vec![2, 3, 3],
            |g, v| {
                g.conv2d(
                    v[0],
                    v[1],
                    v[2],
                    ConvGeometry {
                        stride: 2,
                        padding: 1,
                        dilation: 2,
                    },
                )
            },
        ),
        check(
            "conv_transpose2d",
            vec![vec![2, 3, 3], vec![2, 3, 2, 2], vec![3]],
            vec![3, 6, 6],
            |g, v| g.conv_transpose2d(v[0], v[1], Some(v[2]), 2),
        ),
        check(
            "conv_transpose2d_overlapping",
            vec![vec![1, 3, 3], vec![1, 2, 3, 3]],
            vec![2, 5, 5],
            |g, v| g.conv_transpose2d(v[0], v[1], None, 1),
        ),
        check("max_pool2d", vec![vec![2, 4, 4]], vec![2, 2, 2], |g, v| {
            g.max_pool2d(v[0], 2)
        }),
        check("global_avg_pool", vec![vec![3, 4, 4]], vec![3], |g, v| {
            g.global_avg_pool(v[0])
        }),
        check(
            "affine",
            vec![vec![5], vec![3, 5], vec![3]],
            vec![3],
            |g, v| g.affine(v[0], v[1], v[2]),
        ),
        OpCheck {
            name: "relu",
            shapes: vec![vec![3, 3]],
            out_shape: vec![3, 3],
            away_from_zero: true,
            build: |g, v| Ok(g.relu(v[0])),
        },
        check(
            "sigmoid",
            vec![vec![6]],
            vec![6],
            |g, v| Ok(g.sigmoid(v[0])),
        ),
        check("arctan", vec![vec![6]], vec![6], |g, v| Ok(g.arctan(v[0]))),
        check("scale", vec![vec![6]], vec![6], |g, v| {
            Ok(g.scale(v[0], -1.7))
        }),
        check("add", vec![vec![2, 3], vec![2, 3]], vec![2, 3], |g, v| {
            g.add(v[0], v[1])
        }),
        check("mul", vec![vec![2, 3], vec![2, 3]], vec![2, 3], |g, v| {
            g.mul(v[0], v[1])
        }),
        check("sum", vec![vec![2, 3]], vec![1], |g, v| Ok(g.sum(v[0]))),
        check(
            "blend",
            vec![vec![1], vec![1, 3, 3], vec![1, 3, 3]],
            vec![1, 3, 3],
            |g, v| g.blend(v[0], v[1], v[2]),
        ),
        check("straight_through", vec![vec![4]], vec![4], |g, v| {
            // identity forward, so the surrogate gradient is the true one
            let fwd = g.value(v[0]).to_vec();
            g.straight_through(v[0], fwd, true)
        }),
        check(
            "density_mse",
            vec![vec![1, 3, 3], vec![1, 2, 2]],
            vec![1],
            |g, v| {
                let t1 = Tensor::new(vec![1, 3, 3], (0..9).map(|i| i as f64 * 0.1).collect())?;
                let t2 = Tensor::new(vec![1, 2, 2], vec![0.3, -0.2, 0.5, 0.0])?;
                g.density_mse(&[v[0], v[1]], &[&t1, &t2])
            },
        ),
        OpCheck {
            name: "conv_relu_gap",
            shapes: vec![vec![1, 6, 6], vec![3, 1, 3, 3], vec![3]],
            out_shape: vec![3],
            away_from_zero: true,
            build: |g, v| {
                let c = g.conv2d(v[0], v[1], v[2], ConvGeometry::same(3))?;
                let r = g.relu(c);
                g.global_avg_pool(r)
            },
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_matches_analytic() {
        let x = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let err = finite_diff_check(
            |g, v| {
                let sq = g.mul(v, v)?;
                Ok(g.sum(sq))
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let x = Tensor::new(vec![3], vec![0.3, -1.0, 2.0]).unwrap();
        let err = finite_diff_check(
            |g, v| {
                let z = g.scale(v, 0.0);
                Ok(g.sum(z))
            },
            &x,
            1e-4,
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn every_op_passes() {
        for check in op_checks() {
            for seed in 0..3 {
                let err = check.run(seed).unwrap();
                assert!(
                    err < check.tolerance(),
                    "{} seed {seed}: {err}",
                    check.name()
                );
            }
        }
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // straight-through with a non-identity forward disagrees with differences
        let x = Tensor::new(vec![1], vec![0.3]).unwrap();
        let err = finite_diff_check(
            |g, v| {
                let fwd = vec![2.0 * g.value(v)[0]];
                let st = g.straight_through(v, fwd, true)?;
                Ok(g.sum(st))
            },
            &x,
            1e-4,
        )
        .unwrap();
        assert!(err > 0.4);
    }
}
