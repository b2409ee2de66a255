use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{discretize, normalize_response, AsdConfig, FusionInputs, FusionRegistry, InitScheme};
use crate::error::{dim_err, AsdError, Result};
use crate::tensor::{ConvGeometry, Graph, Tensor, Var};

#[derive(Clone, Copy, Debug)]
struct Layer {
    weight: usize,
    bias: usize,
}

#[derive(Clone, Debug)]
struct Layout {
    backbone: Vec<Layer>,
    deconv: Layer,
    dense_convs: Vec<Layer>,
    dense_head: Layer,
    sparse_convs: Vec<Layer>,
    sparse_head: Layer,
    fc1: Layer,
    fc2: Layer,
}

/// Backbone, dense and sparse pathways, and adaption branch, with all parameters.
#[derive(Clone, Debug)]
pub struct AsdModel {
    config: AsdConfig,
    names: Vec<String>,
    params: Vec<Tensor>,
    layout: Layout,
}

/// Nodes and scalars produced by one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub fused: Var,
    pub dense_map: Var,
    pub sparse_map: Var,
    pub w_raw: f64,
    pub w_star: f64,
    pub w_disc: f64,
    pub bin_index: usize,
    /// Graph leaves of the model parameters, in [`AsdModel::params`] order.
    pub params: Vec<Var>,
}

/// Materialized [`ForwardOutput`] for inference.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub fused: Tensor,
    pub dense_map: Tensor,
    pub sparse_map: Tensor,
    pub w_raw: f64,
    pub w_star: f64,
    pub w_disc: f64,
    pub bin_index: usize,
}

impl Prediction {
    pub fn count(&self) -> f64 {
        self.fused.sum()
    }
}

struct Builder {
    names: Vec<String>,
    /// Shape and, for weights, the number of inputs feeding one output unit.
    shapes: Vec<(Vec<usize>, Option<usize>)>,
}

impl Builder {
    fn add(
        &mut self,
        name: &str,
        weight_shape: Vec<usize>,
        fan_in: usize,
        bias_len: usize,
    ) -> Layer {
        let weight = self.names.len();
        self.names.push(format!("{name}.weight"));
        self.shapes.push((weight_shape, Some(fan_in)));
        self.names.push(format!("{name}.bias"));
        self.shapes.push((vec![bias_len], None));
        Layer {
            weight,
            bias: weight + 1,
        }
    }
}

impl AsdModel {
    /// Builds the network with zero biases and weights drawn per `config.init`.
    pub fn build(config: AsdConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut b = Builder {
            names: Vec::new(),
            shapes: Vec::new(),
        };
        let mut c_in = 1;
        let mut backbone = Vec::new();
        for (i, &c) in config.backbone_channels.iter().enumerate() {
            backbone.push(b.add(&format!("backbone.{i}"), vec![c, c_in, 3, 3], c_in * 9, c));
            c_in = c;
        }
        let feat = c_in;
        let pc = config.pathway_channels;
        let k = config.dense_kernel;
        // stride equals kernel size, so each output pixel sees one tap per input channel
        let deconv = b.add("dense.deconv", vec![feat, pc, 2, 2], feat, pc);
        let dense_convs = (0..config.dense_layers)
            .map(|i| {
                b.add(
                    &format!("dense.conv.{i}"),
                    vec![pc, pc, k, k],
                    pc * k * k,
                    pc,
                )
            })
            .collect();
        let dense_head = b.add("dense.head", vec![1, pc, 1, 1], pc, 1);
        let mut sparse_convs = Vec::new();
        let mut sc = feat;
        for i in 0..config.sparse_layers {
            sparse_convs.push(b.add(&format!("sparse.conv.{i}"), vec![pc, sc, 3, 3], sc * 9, pc));
            sc = pc;
        }
        let sparse_head = b.add("sparse.head", vec![1, pc, 1, 1], pc, 1);
        let fc1 = b.add(
            "adaption.fc1",
            vec![config.adaption_hidden, feat],
            feat,
            config.adaption_hidden,
        );
        let fc2 = b.add(
            "adaption.fc2",
            vec![1, config.adaption_hidden],
            config.adaption_hidden,
            1,
        );

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = b
            .shapes
            .into_iter()
            .map(|(shape, fan_in)| {
                let n: usize = shape.iter().product();
                let data = if let Some(fan_in) = fan_in {
                    let std = match config.init {
                        InitScheme::Gaussian => config.init_std,
                        InitScheme::He => (2.0 / fan_in as f64).sqrt(),
                    };
                    let normal = Normal::new(0.0, std)
                        .map_err(|e| AsdError::Config(format!("bad init std {std}: {e}")))?;
                    (0..n).map(|_| normal.sample(&mut rng)).collect()
                } else {
                    vec![0.0; n]
                };
                Tensor::new(shape, data).map(Tensor::with_grad)
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            config,
            names: b.names,
            params,
            layout: Layout {
                backbone,
                deconv,
                dense_convs,
                dense_head,
                sparse_convs,
                sparse_head,
                fc1,
                fc2,
            },
        })
    }

    pub fn config(&self) -> &AsdConfig {
        &self.config
    }

    /// Switches fusion variant and bin count; neither changes the parameter set.
    pub fn set_fusion(&mut self, variant: &str, bins: usize) -> Result<()> {
        let mut cfg = self.config.clone();
        cfg.variant = variant.to_string();
        cfg.bins = bins;
        cfg.validate()?;
        self.config = cfg;
        Ok(())
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn param_by_name_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        let idx = self.names.iter().position(|n| n == name)?;
        Some(&mut self.params[idx])
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    pub fn zero_grads(&mut self) {
        self.params.iter_mut().for_each(Tensor::zero_grad);
    }

    /// Adds the gradients of the bound parameter leaves into the parameter tensors.
    pub fn accumulate_grads(&mut self, g: &Graph, bindings: &[Var]) -> Result<()> {
        if bindings.len() != self.params.len() {
            return Err(AsdError::State(
                "parameter bindings do not match the model".into(),
            ));
        }
        for (p, &v) in self.params.iter_mut().zip(bindings) {
            g.accumulate_into(v, p)?;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(Tensor::is_finite)
    }

    /// Density output extent for an `h x w` image.
    pub fn output_shape(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let s = self.config.output_stride();
        if h == 0 || w == 0 || !h.is_multiple_of(s) || !w.is_multiple_of(s) {
            return dim_err(format!(
                "image {h}x{w} is not divisible by the output stride {s}"
            ));
        }
        Ok((h / s, w / s))
    }

    pub(crate) fn replace_params(&mut self, params: Vec<(String, Tensor)>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(AsdError::Format(format!(
                "checkpoint has {} tensors, model expects {}",
                params.len(),
                self.params.len()
            )));
        }
        for (name, t) in params {
            let idx = self
                .names
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| AsdError::Format(format!("unknown parameter '{name}'")))?;
            if t.shape() != self.params[idx].shape() {
                return dim_err(format!(
                    "parameter '{name}' has shape {:?}, expected {:?}",
                    t.shape(),
                    self.params[idx].shape()
                ));
            }
            self.params[idx] = t.with_grad();
        }
        Ok(())
    }

    fn check_image(&self, image: &Tensor) -> Result<()> {
        let s = image.shape();
        if s.len() != 3 || s[0] != 1 {
            return dim_err(format!("image must be [1, H, W], got {s:?}"));
        }
        self.output_shape(s[1], s[2])?;
        if let Some(v) = image.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(AsdError::Argument(format!(
                "image values must lie in [0, 1], found {v}"
            )));
        }
        Ok(())
    }

    /// Records the full network on `g`. The fused map is connected to every
    /// parameter the chosen variant depends on.
    pub fn forward(&self, g: &mut Graph, image: &Tensor) -> Result<ForwardOutput> {
        let p = self.bind(g);
        self.forward_bound(g, image, p)
    }

    /// Binds every parameter as a graph leaf, in [`AsdModel::params`] order.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.params.iter().map(|t| g.leaf(t)).collect()
    }

    /// Like [`AsdModel::forward`] but reads parameters from already bound nodes,
    /// which lets callers substitute or freeze individual tensors.
    pub fn forward_bound(
        &self,
        g: &mut Graph,
        image: &Tensor,
        p: Vec<Var>,
    ) -> Result<ForwardOutput> {
        self.check_image(image)?;
        if p.len() != self.params.len() {
            return Err(AsdError::State(format!(
                "{} parameter nodes given, model has {}",
                p.len(),
                self.params.len()
            )));
        }
        for (i, (&v, t)) in p.iter().zip(&self.params).enumerate() {
            if g.shape(v) != t.shape() {
                return dim_err(format!(
                    "parameter node {i} has shape {:?}, expected {:?}",
                    g.shape(v),
                    t.shape()
                ));
            }
        }
        let conv = |g: &mut Graph, x: Var, l: Layer, kernel: usize| {
            g.conv2d(x, p[l.weight], p[l.bias], ConvGeometry::same(kernel))
        };

        let mut x = g.constant(image);
        for (i, &layer) in self.layout.backbone.iter().enumerate() {
            let c = conv(g, x, layer, 3)?;
            x = g.relu(c);
            if i < self.config.backbone_pools {
                x = g.max_pool2d(x, 2)?;
            }
        }
        let features = x;

        let up = g.conv_transpose2d(
            features,
            p[self.layout.deconv.weight],
            Some(p[self.layout.deconv.bias]),
            2,
        )?;
        let mut d = g.relu(up);
        for &layer in &self.layout.dense_convs {
            let c = conv(g, d, layer, self.config.dense_kernel)?;
            d = g.relu(c);
        }
        d = g.max_pool2d(d, 2)?;
        let dense_map = conv(g, d, self.layout.dense_head, 1)?;

        let mut s = features;
        for &layer in &self.layout.sparse_convs {
            let c = conv(g, s, layer, 3)?;
            s = g.relu(c);
        }
        let sparse_map = conv(g, s, self.layout.sparse_head, 1)?;

        let pooled = g.global_avg_pool(features)?;
        let h = g.affine(pooled, p[self.layout.fc1.weight], p[self.layout.fc1.bias])?;
        let h = g.relu(h);
        let w_raw_node = g.affine(h, p[self.layout.fc2.weight], p[self.layout.fc2.bias])?;
        let sig = g.sigmoid(w_raw_node);
        let at = g.arctan(sig);
        let w_star_node = g.scale(at, 2.0 / std::f64::consts::PI);

        let w_raw = g.scalar(w_raw_node);
        let w_star = g.scalar(w_star_node);
        if !w_star.is_finite() {
            return Err(AsdError::Numerical(format!("gate response is {w_raw}")));
        }
        debug_assert!((w_star - normalize_response(w_raw)).abs() < 1e-12);
        let bins = self.config.bins;
        let disc = discretize(w_star, bins)?;
        // a single bin is a constant function of the response: no surrogate gradient
        let w_disc_node = g.straight_through(w_star_node, vec![disc.w_disc], bins > 1)?;

        let inputs = FusionInputs {
            dense: dense_map,
            sparse: sparse_map,
            w_star: w_star_node,
            w_disc: w_disc_node,
            dense_first: self.config.dense_first,
        };
        let fused = FusionRegistry::builtin()
            .get(&self.config.variant)?
            .fuse(g, &inputs)?;

        Ok(ForwardOutput {
            fused,
            dense_map,
            sparse_map,
            w_raw,
            w_star,
            w_disc: disc.w_disc,
            bin_index: disc.bin_index,
            params: p,
        })
    }

    pub fn predict(&self, image: &Tensor) -> Result<Prediction> {
        let mut g = Graph::new();
        let out = self.forward(&mut g, image)?;
        let fused = g.to_tensor(out.fused);
        if !fused.is_finite() {
            return Err(AsdError::Numerical("prediction contains NaN/Inf".into()));
        }
        Ok(Prediction {
            fused,
            dense_map: g.to_tensor(out.dense_map),
            sparse_map: g.to_tensor(out.sparse_map),
            w_raw: out.w_raw,
            w_star: out.w_star,
            w_disc: out.w_disc,
            bin_index: out.bin_index,
        })
    }

    /// Bin index of the gate response for `image`.
    pub fn scenario_of(&self, image: &Tensor) -> Result<usize> {
        Ok(self.predict(image)?.bin_index)
    }
}
