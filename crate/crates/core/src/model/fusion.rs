//! Ways of combining the dense and sparse density maps.
//!
//! Every architecture variant is a [`FusionStrategy`] registered under its config
//! name. The model always computes both pathways and the gate; strategies decide
//! which of them reach the output.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::error::{AsdError, Result};
use crate::tensor::{Graph, Tensor, Var};

/// Graph nodes available to a fusion strategy.
#[derive(Clone, Copy, Debug)]
pub struct FusionInputs {
    pub dense: Var,
    pub sparse: Var,
    /// Normalized gate response, in (0, 0.5).
    pub w_star: Var,
    /// Bin centre of `w_star`, with a straight-through backward.
    pub w_disc: Var,
    /// When true the gate weights the dense map, otherwise the sparse one.
    pub dense_first: bool,
}

impl FusionInputs {
    /// `w * first + (1 - w) * second`, where `first` is the gated pathway.
    pub fn gated_blend(&self, g: &mut Graph, w: Var) -> Result<Var> {
        if self.dense_first {
            g.blend(w, self.dense, self.sparse)
        } else {
            g.blend(w, self.sparse, self.dense)
        }
    }
}

pub trait FusionStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether the adaption branch influences the fused map.
    fn uses_gate(&self) -> bool;

    /// Whether the bin count changes the fused map.
    fn uses_bins(&self) -> bool {
        false
    }

    fn fuse(&self, g: &mut Graph, inputs: &FusionInputs) -> Result<Var>;
}

/// Sparse pathway only.
pub struct SparseOnly;

impl FusionStrategy for SparseOnly {
    fn name(&self) -> &'static str {
        "sparse_only"
    }

    fn uses_gate(&self) -> bool {
        false
    }

    fn fuse(&self, _g: &mut Graph, inputs: &FusionInputs) -> Result<Var> {
        Ok(inputs.sparse)
    }
}

/// Dense pathway only.
pub struct DenseOnly;

impl FusionStrategy for DenseOnly {
    fn name(&self) -> &'static str {
        "dense_only"
    }

    fn uses_gate(&self) -> bool {
        false
    }

    fn fuse(&self, _g: &mut Graph, inputs: &FusionInputs) -> Result<Var> {
        Ok(inputs.dense)
    }
}

/// Both pathways with equal weight.
pub struct FixedHalf;

impl FusionStrategy for FixedHalf {
    fn name(&self) -> &'static str {
        "fixed_half"
    }

    fn uses_gate(&self) -> bool {
        false
    }

    fn fuse(&self, g: &mut Graph, inputs: &FusionInputs) -> Result<Var> {
        let half = g.constant(&Tensor::scalar(0.5));
        inputs.gated_blend(g, half)
    }
}

/// Learned weight without discretization.
pub struct Continuous;

impl FusionStrategy for Continuous {
    fn name(&self) -> &'static str {
        "continuous"
    }

    fn uses_gate(&self) -> bool {
        true
    }

    fn fuse(&self, g: &mut Graph, inputs: &FusionInputs) -> Result<Var> {
        inputs.gated_blend(g, inputs.w_star)
    }
}

/// Learned weight snapped to its bin centre.
pub struct Discretized;

impl FusionStrategy for Discretized {
    fn name(&self) -> &'static str {
        "discretized"
    }

    fn uses_gate(&self) -> bool {
        true
    }

    fn uses_bins(&self) -> bool {
        true
    }

    fn fuse(&self, g: &mut Graph, inputs: &FusionInputs) -> Result<Var> {
        inputs.gated_blend(g, inputs.w_disc)
    }
}

pub struct FusionRegistry {
    strategies: BTreeMap<&'static str, Box<dyn FusionStrategy>>,
    order: Vec<&'static str>,
}

impl FusionRegistry {
    pub fn new() -> Self {
        Self {
            strategies: BTreeMap::new(),
            order: Vec::new(),
        }
    }

    pub fn register(&mut self, strategy: Box<dyn FusionStrategy>) {
        let name = strategy.name();
        if self.strategies.insert(name, strategy).is_none() {
            self.order.push(name);
        }
    }

    /// The five architecture variants, in ablation order.
    pub fn builtin() -> &'static FusionRegistry {
        static REGISTRY: OnceLock<FusionRegistry> = OnceLock::new();
        REGISTRY.get_or_init(|| {
            let mut r = FusionRegistry::new();
            r.register(Box::new(SparseOnly));
            r.register(Box::new(DenseOnly));
            r.register(Box::new(FixedHalf));
            r.register(Box::new(Continuous));
            r.register(Box::new(Discretized));
            r
        })
    }

    pub fn get(&self, name: &str) -> Result<&dyn FusionStrategy> {
        self.strategies
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| {
                AsdError::Config(format!(
                    "unknown variant '{name}', expected one of {:?}",
                    self.order
                ))
            })
    }

    /// Names in registration order.
    pub fn names(&self) -> &[&'static str] {
        &self.order
    }
}

impl Default for FusionRegistry {
    fn default() -> Self {
        Self::new()
    }
}
