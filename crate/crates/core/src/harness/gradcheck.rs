//! Registry of named gradient checks: every graph primitive plus end-to-end
//! checks through a minimal two-pathway network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{AsdError, Result};
use crate::model::{AsdConfig, AsdModel};
use crate::tensor::gradcheck::{finite_diff_check_piecewise, op_checks, GradCheck, DEFAULT_STEP};
use crate::tensor::{Graph, Tensor, Var};

pub const MODEL_TOLERANCE: f64 = 1e-3;

/// Which parameters a [`ModelCheck`] perturbs.
#[derive(Clone, Copy, Debug)]
pub enum ParamSelection {
    All,
    /// The dense and sparse pathways. Under a discretized gate the adaption
    /// branch, and the backbone that feeds it, receive the straight-through
    /// surrogate, which finite differences cannot see.
    Pathways,
    Named(&'static [&'static str]),
}

/// Finite differences of the density loss of a minimal network with respect to
/// a selection of its parameters.
pub struct ModelCheck {
    name: &'static str,
    variant: &'static str,
    bins: usize,
    selection: ParamSelection,
}

impl ModelCheck {
    pub fn minimal_config(variant: &str, bins: usize) -> AsdConfig {
        AsdConfig {
            backbone_channels: vec![4],
            backbone_pools: 1,
            dense_layers: 1,
            sparse_layers: 1,
            pathway_channels: 4,
            adaption_hidden: 4,
            bins,
            variant: variant.to_string(),
            init_std: 0.3,
            ..AsdConfig::default()
        }
    }

    fn selected(&self, names: &[String]) -> Vec<usize> {
        (0..names.len())
            .filter(|&i| match self.selection {
                ParamSelection::All => true,
                ParamSelection::Pathways => {
                    names[i].starts_with("dense.") || names[i].starts_with("sparse.")
                }
                ParamSelection::Named(list) => list.contains(&names[i].as_str()),
            })
            .collect()
    }
}

impl GradCheck for ModelCheck {
    fn name(&self) -> &str {
        self.name
    }

    fn tolerance(&self) -> f64 {
        MODEL_TOLERANCE
    }

    fn run(&self, seed: u64) -> Result<f64> {
        let model = AsdModel::build(Self::minimal_config(self.variant, self.bins), seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
        let image = Tensor::new(
            vec![1, 8, 8],
            (0..64).map(|_| rng.gen_range(0.0..1.0)).collect(),
        )?;
        let target = Tensor::new(
            vec![1, 4, 4],
            (0..16).map(|_| rng.gen_range(0.0..0.2)).collect(),
        )?;

        let pred = model.predict(&image)?;
        let pos = pred.w_star * self.bins as f64;
        if self.variant == "discretized" && (pos - pos.round()).abs() < 1e-3 {
            return Err(AsdError::State(format!(
                "seed {seed}: gate response {} sits on a bin edge",
                pred.w_star
            )));
        }

        let chosen = self.selected(model.param_names());
        if chosen.is_empty() {
            return Err(AsdError::State(format!(
                "{}: no parameters selected",
                self.name
            )));
        }
        let xs: Vec<Tensor> = chosen.iter().map(|&i| model.params()[i].clone()).collect();
        finite_diff_check_piecewise(
            |g: &mut Graph, vars: &[Var]| {
                let mut bound = Vec::with_capacity(model.params().len());
                let mut next = vars.iter();
                for (i, p) in model.params().iter().enumerate() {
                    bound.push(if chosen.contains(&i) {
                        *next.next().expect("one var per selected tensor")
                    } else {
                        g.constant(p)
                    });
                }
                let out = model.forward_bound(g, &image, bound)?;
                g.density_mse(&[out.fused], &[&target])
            },
            &xs,
            DEFAULT_STEP,
        )
    }
}

pub fn model_checks() -> Vec<ModelCheck> {
    vec![
        ModelCheck {
            name: "asd_continuous",
            variant: "continuous",
            bins: 10,
            selection: ParamSelection::All,
        },
        ModelCheck {
            name: "asd_discretized_pathways",
            variant: "discretized",
            bins: 10,
            selection: ParamSelection::Pathways,
        },
        ModelCheck {
            name: "asd_discretized_head_slice",
            variant: "discretized",
            bins: 10,
            selection: ParamSelection::Named(&["dense.head.weight"]),
        },
    ]
}

/// Every registered check, op-level first.
pub fn all_checks() -> Vec<Box<dyn GradCheck>> {
    let mut out: Vec<Box<dyn GradCheck>> = Vec::new();
    out.extend(
        op_checks()
            .into_iter()
            .map(|c| Box::new(c) as Box<dyn GradCheck>),
    );
    out.extend(
        model_checks()
            .into_iter()
            .map(|c| Box::new(c) as Box<dyn GradCheck>),
    );
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckOutcome {
    pub name: String,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Runs every check, or only the one called `only`.
pub fn run_gradchecks(only: Option<&str>, seed: u64) -> Result<Vec<GradCheckOutcome>> {
    let checks = all_checks();
    let selected: Vec<&Box<dyn GradCheck>> = checks
        .iter()
        .filter(|c| only.is_none_or(|n| c.name() == n))
        .collect();
    if selected.is_empty() {
        let names: Vec<&str> = checks.iter().map(|c| c.name()).collect();
        return Err(AsdError::Argument(format!(
            "unknown gradient check '{}', expected one of {names:?}",
            only.unwrap_or_default()
        )));
    }
    selected
        .into_iter()
        .map(|c| {
            let err = c.run(seed)?;
            Ok(GradCheckOutcome {
                name: c.name().to_string(),
                max_rel_error: err,
                tolerance: c.tolerance(),
                passed: err < c.tolerance(),
            })
        })
        .collect()
}
