use super::Tensor;
use crate::error::{AsdError, Result};

/// Stochastic gradient descent with classical momentum:
/// `v <- momentum * v + grad; p <- p - lr * v`.
///
/// Gradients are zeroed after every step.
#[derive(Clone, Debug)]
pub struct Sgd {
    lr: f64,
    momentum: f64,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(AsdError::Config(format!(
                "learning rate must be > 0, got {lr}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(AsdError::Config(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        Ok(Self {
            lr,
            momentum,
            velocity: Vec::new(),
        })
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn step(&mut self, params: &mut [Tensor]) -> Result<()> {
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        }
        if self.velocity.len() != params.len()
            || self
                .velocity
                .iter()
                .zip(params.iter())
                .any(|(v, p)| v.len() != p.numel())
        {
            return Err(AsdError::State(
                "parameter set changed between SGD steps".into(),
            ));
        }
        if let Some(i) = params.iter().position(|p| p.grad().is_none()) {
            return Err(AsdError::State(format!(
                "parameter {i} has no gradient buffer"
            )));
        }
        for (p, v) in params.iter_mut().zip(self.velocity.iter_mut()) {
            let (grad, data) = p.grad_and_data_mut();
            let grad = grad.expect("checked above");
            for ((x, vel), g) in data.iter_mut().zip(v.iter_mut()).zip(grad.iter_mut()) {
                *vel = self.momentum * *vel + *g;
                *x -= self.lr * *vel;
                *g = 0.0;
            }
        }
        Ok(())
    }
}
