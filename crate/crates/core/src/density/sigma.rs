use std::collections::BTreeMap;
use std::sync::OnceLock;

use super::{knn_mean_distance, KernelSpec, Point};
use crate::error::{AsdError, Result};

/// Chooses a Gaussian width for every annotated head.
pub trait SigmaRule: Send + Sync {
    fn name(&self) -> &'static str;

    fn sigmas(&self, points: &[Point], spec: &KernelSpec) -> Result<Vec<f64>>;
}

/// `sigma_i = beta * mean distance to the k nearest heads`, clamped to
/// `[sigma_min, sigma_max]`.
pub struct AdaptiveSigma;

impl AdaptiveSigma {
    pub const NAME: &'static str = "geometry_adaptive";
}

impl SigmaRule for AdaptiveSigma {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn sigmas(&self, points: &[Point], spec: &KernelSpec) -> Result<Vec<f64>> {
        Ok(knn_mean_distance(points, spec.k)?
            .into_iter()
            .map(|d| (spec.beta * d).clamp(spec.sigma_min, spec.sigma_max))
            .collect())
    }
}

/// The same width for every head.
pub struct FixedSigma;

impl FixedSigma {
    pub const NAME: &'static str = "fixed";
}

impl SigmaRule for FixedSigma {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn sigmas(&self, points: &[Point], spec: &KernelSpec) -> Result<Vec<f64>> {
        Ok(vec![spec.fixed_sigma; points.len()])
    }
}

pub struct SigmaRegistry {
    rules: BTreeMap<&'static str, Box<dyn SigmaRule>>,
    aliases: BTreeMap<&'static str, &'static str>,
}

impl SigmaRegistry {
    pub fn new() -> Self {
        Self {
            rules: BTreeMap::new(),
            aliases: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, rule: Box<dyn SigmaRule>) {
        self.rules.insert(rule.name(), rule);
    }

    pub fn alias(&mut self, alias: &'static str, target: &'static str) {
        self.aliases.insert(alias, target);
    }

    /// Both rules, with `adaptive` accepted as shorthand for `geometry_adaptive`.
    pub fn builtin() -> &'static SigmaRegistry {
        static REGISTRY: OnceLock<SigmaRegistry> = OnceLock::new();
        REGISTRY.get_or_init(|| {
            let mut r = SigmaRegistry::new();
            r.register(Box::new(AdaptiveSigma));
            r.register(Box::new(FixedSigma));
            r.alias("adaptive", AdaptiveSigma::NAME);
            r
        })
    }

    pub fn get(&self, name: &str) -> Result<&dyn SigmaRule> {
        let key = self.aliases.get(name).copied().unwrap_or(name);
        self.rules.get(key).map(|r| r.as_ref()).ok_or_else(|| {
            AsdError::Config(format!(
                "unknown kernel mode '{name}', expected one of {:?}",
                self.names()
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.rules.keys().copied().collect()
    }
}

impl Default for SigmaRegistry {
    fn default() -> Self {
        Self::new()
    }
}
