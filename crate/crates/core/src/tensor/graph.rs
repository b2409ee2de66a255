use super::kernels::{self, ConvDims, DeconvDims};
use super::Tensor;
use crate::error::{dim_err, AsdError, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl Default for ConvGeometry {
    fn default() -> Self {
        Self {
            stride: 1,
            padding: 0,
            dilation: 1,
        }
    }
}

impl ConvGeometry {
    /// Stride 1, padding that preserves extent for an odd kernel.
    pub fn same(kernel: usize) -> Self {
        Self {
            stride: 1,
            padding: kernel / 2,
            dilation: 1,
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Var,
        dims: ConvDims,
    },
    ConvTranspose2d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        dims: DeconvDims,
    },
    MaxPool2d {
        input: Var,
        argmax: Vec<usize>,
    },
    GlobalAvgPool {
        input: Var,
        plane: usize,
    },
    Affine {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Relu(Var),
    Sigmoid(Var),
    Arctan(Var),
    Scale(Var, f64),
    Add(Var, Var),
    Mul(Var, Var),
    Sum(Var),
    Blend {
        weight: Var,
        a: Var,
        b: Var,
    },
    StraightThrough {
        input: Var,
        pass_gradient: bool,
    },
    DensityMse {
        preds: Vec<Var>,
        targets: Vec<Vec<f64>>,
        scale: f64,
    },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    requires_grad: bool,
    op: Op,
}

/// Tape of executed operations.
///
/// Nodes are appended in execution order, so every node comes after the nodes
/// that produced its inputs and reverse index order is a valid backward schedule.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, requires_grad: bool, op: Op) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            shape,
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|&v| self.nodes[v.0].requires_grad)
    }

    /// Binds a tensor as a leaf; it tracks gradients iff the tensor does.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(
            t.shape().to_vec(),
            t.data().to_vec(),
            t.requires_grad(),
            Op::Leaf,
        )
    }

    /// Binds a tensor as a leaf that always tracks gradients.
    pub fn param(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), true, Op::Leaf)
    }

    pub fn constant(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), false, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    /// First element; convenient for scalar nodes.
    pub fn scalar(&self, v: Var) -> f64 {
        self.node(v).value[0]
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::new(n.shape.clone(), n.value.clone()).expect("graph nodes hold consistent shapes")
    }

    /// Gradient of the last backward pass with respect to `v`, if it received one.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Adds the gradient of `v` into `t`'s gradient buffer. A node that received no
    /// gradient contributes zeros.
    pub fn accumulate_into(&self, v: Var, t: &mut Tensor) -> Result<()> {
        match self.grad(v) {
            Some(g) => t.accumulate_grad(g),
            None => {
                if t.grad().is_none() {
                    return Err(AsdError::State("tensor does not track gradients".into()));
                }
                Ok(())
            }
        }
    }

    pub fn conv2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Var,
        geom: ConvGeometry,
    ) -> Result<Var> {
        let (is, ws, bs) = (self.shape(input), self.shape(weight), self.shape(bias));
        if is.len() != 3 || ws.len() != 4 {
            return dim_err(format!(
                "conv2d expects [C,H,W] input and [O,C,kH,kW] weight, got {is:?} and {ws:?}"
            ));
        }
        if is[0] != ws[1] {
            return dim_err(format!(
                "conv2d input has {} channels but weight expects {}",
                is[0], ws[1]
            ));
        }
        if bs != [ws[0]] {
            return dim_err(format!(
                "conv2d bias shape {bs:?} does not match {} output channels",
                ws[0]
            ));
        }
        if geom.stride == 0 || geom.dilation == 0 {
            return Err(AsdError::Argument(
                "conv2d stride and dilation must be >= 1".into(),
            ));
        }
        let h_out =
            kernels::conv_out_extent(is[1], ws[2], geom.stride, geom.padding, geom.dilation);
        let w_out =
            kernels::conv_out_extent(is[2], ws[3], geom.stride, geom.padding, geom.dilation);
        let (Some(h_out), Some(w_out)) = (h_out, w_out) else {
            return dim_err(format!(
                "conv2d kernel {ws:?} does not fit input {is:?} with {geom:?}"
            ));
        };
        let dims = ConvDims {
            c_in: is[0],
            h: is[1],
            w: is[2],
            c_out: ws[0],
            kh: ws[2],
            kw: ws[3],
            h_out,
            w_out,
            stride: geom.stride,
            padding: geom.padding,
            dilation: geom.dilation,
        };
        let mut out = vec![0.0; dims.c_out * h_out * w_out];
        kernels::conv2d_forward(
            &dims,
            self.value(input),
            self.value(weight),
            self.value(bias),
            &mut out,
        );
        let rg = self.rg(&[input, weight, bias]);
        Ok(self.push(
            vec![dims.c_out, h_out, w_out],
            out,
            rg,
            Op::Conv2d {
                input,
                weight,
                bias,
                dims,
            },
        ))
    }

    pub fn conv_transpose2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
    ) -> Result<Var> {
        let (is, ws) = (self.shape(input), self.shape(weight));
        if is.len() != 3 || ws.len() != 4 {
            return dim_err(format!(
                "conv_transpose2d expects [C,H,W] input and [C,O,kH,kW] weight, got {is:?} and {ws:?}"
            ));
        }
        if is[0] != ws[0] {
            return dim_err(format!(
                "conv_transpose2d input has {} channels but weight expects {}",
                is[0], ws[0]
            ));
        }
        if stride == 0 {
            return Err(AsdError::Argument(
                "conv_transpose2d stride must be >= 1".into(),
            ));
        }
        if let Some(b) = bias {
            if self.shape(b) != [ws[1]] {
                return dim_err(format!("conv_transpose2d bias must have {} entries", ws[1]));
            }
        }
        let dims = DeconvDims {
            c_in: is[0],
            h: is[1],
            w: is[2],
            c_out: ws[1],
            kh: ws[2],
            kw: ws[3],
            stride,
        };
        let mut out = vec![0.0; dims.c_out * dims.h_out() * dims.w_out()];
        kernels::conv_transpose2d_forward(
            &dims,
            self.value(input),
            self.value(weight),
            bias.map(|b| self.value(b)),
            &mut out,
        );
        let mut deps = vec![input, weight];
        deps.extend(bias);
        let rg = self.rg(&deps);
        Ok(self.push(
            vec![dims.c_out, dims.h_out(), dims.w_out()],
            out,
            rg,
            Op::ConvTranspose2d {
                input,
                weight,
                bias,
                dims,
            },
        ))
    }

    pub fn max_pool2d(&mut self, input: Var, window: usize) -> Result<Var> {
        let s = self.shape(input).to_vec();
        if s.len() != 3 {
            return dim_err(format!("max_pool2d expects [C,H,W], got {s:?}"));
        }
        if window == 0 || !s[1].is_multiple_of(window) || !s[2].is_multiple_of(window) {
            return dim_err(format!(
                "max_pool2d window {window} does not divide {}x{}",
                s[1], s[2]
            ));
        }
        let (ho, wo) = (s[1] / window, s[2] / window);
        let mut out = vec![0.0; s[0] * ho * wo];
        let argmax =
            kernels::max_pool2d_forward(s[0], s[1], s[2], window, self.value(input), &mut out);
        let rg = self.rg(&[input]);
        Ok(self.push(vec![s[0], ho, wo], out, rg, Op::MaxPool2d { input, argmax }))
    }

    pub fn global_avg_pool(&mut self, input: Var) -> Result<Var> {
        let s = self.shape(input).to_vec();
        if s.len() != 3 {
            return dim_err(format!("global_avg_pool expects [C,H,W], got {s:?}"));
        }
        let plane = s[1] * s[2];
        let out: Vec<f64> = self
            .value(input)
            .chunks(plane)
            .map(|c| c.iter().sum::<f64>() / plane as f64)
            .collect();
        let rg = self.rg(&[input]);
        Ok(self.push(vec![s[0]], out, rg, Op::GlobalAvgPool { input, plane }))
    }

    pub fn affine(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (is, ws, bs) = (self.shape(input), self.shape(weight), self.shape(bias));
        if is.len() != 1 || ws.len() != 2 || ws[1] != is[0] || bs != [ws[0]] {
            return dim_err(format!(
                "affine expects [D_in], [D_out,D_in], [D_out]; got {is:?}, {ws:?}, {bs:?}"
            ));
        }
        let d_in = is[0];
        let x = self.value(input);
        let out: Vec<f64> = self
            .value(weight)
            .chunks(d_in)
            .zip(self.value(bias))
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
            .collect();
        let rg = self.rg(&[input, weight, bias]);
        Ok(self.push(
            vec![out.len()],
            out,
            rg,
            Op::Affine {
                input,
                weight,
                bias,
            },
        ))
    }

    fn unary(&mut self, input: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.value(input).iter().map(|&x| f(x)).collect();
        let shape = self.shape(input).to_vec();
        let rg = self.rg(&[input]);
        self.push(shape, out, rg, op)
    }

    pub fn relu(&mut self, input: Var) -> Var {
        self.unary(input, |x| if x > 0.0 { x } else { 0.0 }, Op::Relu(input))
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        self.unary(input, sigmoid, Op::Sigmoid(input))
    }

    pub fn arctan(&mut self, input: Var) -> Var {
        self.unary(input, f64::atan, Op::Arctan(input))
    }

    pub fn scale(&mut self, input: Var, a: f64) -> Var {
        self.unary(input, |x| a * x, Op::Scale(input, a))
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return dim_err(format!(
                "elementwise operands differ in shape: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            ));
        }
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a, b]);
        Ok(self.push(shape, out, rg, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let s = self.value(input).iter().sum();
        let rg = self.rg(&[input]);
        self.push(vec![1], vec![s], rg, Op::Sum(input))
    }

    /// `weight * a + (1 - weight) * b` with a single-element `weight`.
    pub fn blend(&mut self, weight: Var, a: Var, b: Var) -> Result<Var> {
        if self.value(weight).len() != 1 {
            return dim_err(format!(
                "blend weight must be a scalar, got {:?}",
                self.shape(weight)
            ));
        }
        let w = self.scalar(weight);
        let out = self.binary(
            a,
            b,
            |x, y| w * x + (1.0 - w) * y,
            Op::Blend { weight, a, b },
        )?;
        if self.node(weight).requires_grad {
            self.nodes[out.0].requires_grad = true;
        }
        Ok(out)
    }

    /// A node whose forward value is `forward` but whose backward is the identity
    /// (or nothing, when `pass_gradient` is false).
    pub fn straight_through(
        &mut self,
        input: Var,
        forward: Vec<f64>,
        pass_gradient: bool,
    ) -> Result<Var> {
        if forward.len() != self.value(input).len() {
            return dim_err("straight-through value must match its input length");
        }
        let shape = self.shape(input).to_vec();
        let rg = pass_gradient && self.rg(&[input]);
        Ok(self.push(
            shape,
            forward,
            rg,
            Op::StraightThrough {
                input,
                pass_gradient,
            },
        ))
    }

    /// Halved squared density error averaged over the batch:
    /// `1/(2N) * sum_i ||pred_i - target_i||^2`.
    pub fn density_mse(&mut self, preds: &[Var], targets: &[&Tensor]) -> Result<Var> {
        if preds.is_empty() {
            return Err(AsdError::Argument(
                "loss needs at least one prediction".into(),
            ));
        }
        if preds.len() != targets.len() {
            return Err(AsdError::Argument(format!(
                "{} predictions but {} targets",
                preds.len(),
                targets.len()
            )));
        }
        for (&p, t) in preds.iter().zip(targets) {
            if self.shape(p) != t.shape() {
                return dim_err(format!(
                    "prediction shape {:?} does not match target {:?}",
                    self.shape(p),
                    t.shape()
                ));
            }
        }
        let scale = 1.0 / (2.0 * preds.len() as f64);
        let total: f64 = preds
            .iter()
            .zip(targets)
            .map(|(&p, t)| {
                self.value(p)
                    .iter()
                    .zip(t.data())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum();
        let rg = self.rg(preds);
        Ok(self.push(
            vec![1],
            vec![scale * total],
            rg,
            Op::DensityMse {
                preds: preds.to_vec(),
                targets: targets.iter().map(|t| t.data().to_vec()).collect(),
                scale,
            },
        ))
    }

    /// Reverse-mode accumulation from a scalar node.
    ///
    /// Every recorded node is visited once, newest first. Gradients flowing into a
    /// node from several consumers are summed.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.node(loss).value.len() != 1 {
            return Err(AsdError::Argument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        if !self.scalar(loss).is_finite() {
            return Err(AsdError::Numerical(format!(
                "loss is {}",
                self.scalar(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if self.nodes[idx].requires_grad {
                self.propagate(idx, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        for (idx, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(AsdError::Numerical(format!(
                        "non-finite gradient at node {idx}"
                    )));
                }
            }
        }
        self.grads = grads;
        Ok(())
    }

    /// Removes `v`'s gradient buffer for in-place accumulation, or returns None when
    /// `v` does not track gradients. Pair with [`Graph::put`].
    fn take(&self, grads: &mut [Option<Vec<f64>>], v: Var) -> Option<Vec<f64>> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        Some(
            grads[v.0]
                .take()
                .unwrap_or_else(|| vec![0.0; self.nodes[v.0].value.len()]),
        )
    }

    /// Returns a buffer obtained from [`Graph::take`]. If the same node was taken
    /// twice by one op (aliased inputs) the buffers are summed.
    fn put(grads: &mut [Option<Vec<f64>>], v: Var, buf: Option<Vec<f64>>) {
        let Some(buf) = buf else { return };
        match grads[v.0].as_mut() {
            Some(existing) => existing.iter_mut().zip(&buf).for_each(|(a, b)| *a += b),
            None => grads[v.0] = Some(buf),
        }
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let val = |v: &Var| self.nodes[v.0].value.as_slice();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                weight,
                bias,
                dims,
            } => {
                let mut gi = self.take(grads, *input);
                let mut gw = self.take(grads, *weight);
                let mut gb = self.take(grads, *bias);
                kernels::conv2d_backward(
                    dims,
                    val(input),
                    val(weight),
                    g,
                    gi.as_deref_mut(),
                    gw.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                Self::put(grads, *input, gi);
                Self::put(grads, *weight, gw);
                Self::put(grads, *bias, gb);
            }
            Op::ConvTranspose2d {
                input,
                weight,
                bias,
                dims,
            } => {
                let mut gi = self.take(grads, *input);
                let mut gw = self.take(grads, *weight);
                let mut gb = bias.and_then(|b| self.take(grads, b));
                kernels::conv_transpose2d_backward(
                    dims,
                    val(input),
                    val(weight),
                    g,
                    gi.as_deref_mut(),
                    gw.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                Self::put(grads, *input, gi);
                Self::put(grads, *weight, gw);
                if let Some(b) = bias {
                    Self::put(grads, *b, gb);
                }
            }
            Op::MaxPool2d { input, argmax } => {
                let mut gi = self.take(grads, *input);
                if let Some(gi) = gi.as_mut() {
                    for (&src, &gv) in argmax.iter().zip(g) {
                        gi[src] += gv;
                    }
                }
                Self::put(grads, *input, gi);
            }
            Op::GlobalAvgPool { input, plane } => {
                let mut gi = self.take(grads, *input);
                if let Some(gi) = gi.as_mut() {
                    for (chunk, &gv) in gi.chunks_mut(*plane).zip(g) {
                        let share = gv / *plane as f64;
                        chunk.iter_mut().for_each(|v| *v += share);
                    }
                }
                Self::put(grads, *input, gi);
            }
            Op::Affine {
                input,
                weight,
                bias,
            } => {
                let d_in = val(input).len();
                let mut gi = self.take(grads, *input);
                if let Some(gi) = gi.as_mut() {
                    for (row, &gv) in val(weight).chunks(d_in).zip(g) {
                        gi.iter_mut().zip(row).for_each(|(a, w)| *a += w * gv);
                    }
                }
                Self::put(grads, *input, gi);
                let mut gw = self.take(grads, *weight);
                if let Some(gw) = gw.as_mut() {
                    for (row, &gv) in gw.chunks_mut(d_in).zip(g) {
                        row.iter_mut()
                            .zip(val(input))
                            .for_each(|(a, x)| *a += gv * x);
                    }
                }
                Self::put(grads, *weight, gw);
                let mut gb = self.take(grads, *bias);
                if let Some(gb) = gb.as_mut() {
                    gb.iter_mut().zip(g).for_each(|(a, gv)| *a += gv);
                }
                Self::put(grads, *bias, gb);
            }
            Op::Relu(input) => self.pointwise(
                grads,
                *input,
                g,
                |x, _| if x > 0.0 { 1.0 } else { 0.0 },
                &node.value,
            ),
            Op::Sigmoid(input) => {
                self.pointwise(grads, *input, g, |_, y| y * (1.0 - y), &node.value)
            }
            Op::Arctan(input) => {
                self.pointwise(grads, *input, g, |x, _| 1.0 / (1.0 + x * x), &node.value)
            }
            Op::Scale(input, s) => self.pointwise(grads, *input, g, |_, _| *s, &node.value),
            Op::StraightThrough {
                input,
                pass_gradient,
            } => {
                if *pass_gradient {
                    self.pointwise(grads, *input, g, |_, _| 1.0, &node.value);
                }
            }
            Op::Add(a, b) => {
                self.pointwise(grads, *a, g, |_, _| 1.0, &node.value);
                self.pointwise(grads, *b, g, |_, _| 1.0, &node.value);
            }
            Op::Mul(a, b) => {
                let mut ga = self.take(grads, *a);
                if let Some(ga) = ga.as_mut() {
                    for ((acc, &y), &gv) in ga.iter_mut().zip(val(b)).zip(g) {
                        *acc += gv * y;
                    }
                }
                Self::put(grads, *a, ga);
                let mut gb = self.take(grads, *b);
                if let Some(gb) = gb.as_mut() {
                    for ((acc, &x), &gv) in gb.iter_mut().zip(val(a)).zip(g) {
                        *acc += gv * x;
                    }
                }
                Self::put(grads, *b, gb);
            }
            Op::Sum(input) => {
                let mut gi = self.take(grads, *input);
                if let Some(gi) = gi.as_mut() {
                    gi.iter_mut().for_each(|a| *a += g[0]);
                }
                Self::put(grads, *input, gi);
            }
            Op::Blend { weight, a, b } => {
                let w = val(weight)[0];
                let mut gw = self.take(grads, *weight);
                if let Some(gw) = gw.as_mut() {
                    let d: f64 = g
                        .iter()
                        .zip(val(a))
                        .zip(val(b))
                        .map(|((gv, x), y)| gv * (x - y))
                        .sum();
                    gw[0] += d;
                }
                Self::put(grads, *weight, gw);
                let mut ga = self.take(grads, *a);
                if let Some(ga) = ga.as_mut() {
                    ga.iter_mut().zip(g).for_each(|(acc, gv)| *acc += w * gv);
                }
                Self::put(grads, *a, ga);
                let mut gb = self.take(grads, *b);
                if let Some(gb) = gb.as_mut() {
                    gb.iter_mut()
                        .zip(g)
                        .for_each(|(acc, gv)| *acc += (1.0 - w) * gv);
                }
                Self::put(grads, *b, gb);
            }
            Op::DensityMse {
                preds,
                targets,
                scale,
            } => {
                for (p, t) in preds.iter().zip(targets) {
                    let mut gp = self.take(grads, *p);
                    if let Some(gp) = gp.as_mut() {
                        for ((acc, &x), &y) in gp.iter_mut().zip(val(p)).zip(t) {
                            *acc += g[0] * 2.0 * scale * (x - y);
                        }
                    }
                    Self::put(grads, *p, gp);
                }
            }
        }
    }

    /// Accumulates `g * d(out)/d(in)` where the local derivative is a function of
    /// the input value and the output value.
    fn pointwise(
        &self,
        grads: &mut [Option<Vec<f64>>],
        input: Var,
        g: &[f64],
        local: impl Fn(f64, f64) -> f64,
        out: &[f64],
    ) {
        let mut gi = self.take(grads, input);
        if let Some(gi) = gi.as_mut() {
            let x = &self.nodes[input.0].value;
            for (((acc, &xv), &yv), &gv) in gi.iter_mut().zip(x).zip(out).zip(g) {
                *acc += gv * local(xv, yv);
            }
        }
        Self::put(grads, input, gi);
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
