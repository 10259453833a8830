use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Applies accumulated gradients to the trainable parameters of a store.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    steps: u64,
    moments: Vec<Option<(Vec<f64>, Vec<f64>)>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        if !(config.lr > 0.0 && config.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                config.lr
            )));
        }
        Ok(Self {
            config,
            steps: 0,
            moments: Vec::new(),
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Updates every trainable parameter using `grad_scale · accumulated
    /// gradient`, then clears the gradient buffers. Parameters without a
    /// gradient count as having a zero gradient.
    pub fn step(&mut self, store: &mut ParamStore, grad_scale: f64) {
        self.steps += 1;
        let c = self.config.clone();
        let t = self.steps as i32;
        let (bc1, bc2) = (1.0 - c.beta1.powi(t), 1.0 - c.beta2.powi(t));
        if self.moments.len() < store.len() {
            self.moments.resize(store.len(), None);
        }
        for id in store.trainable_ids() {
            let param = store.get_mut(id);
            let n = param.value.numel();
            let grad = param.grad.take().unwrap_or_else(|| vec![0.0; n]);
            let values = param.value.data_mut();
            match c.kind {
                OptimizerKind::Sgd => {
                    for (w, g) in values.iter_mut().zip(&grad) {
                        *w -= c.lr * grad_scale * g;
                    }
                }
                OptimizerKind::Adam => {
                    let (m, v) = self.moments[id.index()]
                        .get_or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
                    for i in 0..n {
                        let g = grad_scale * grad[i];
                        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
                        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
                        let (mh, vh) = (m[i] / bc1, v[i] / bc2);
                        values[i] -= c.lr * mh / (vh.sqrt() + c.eps);
                    }
                }
            }
        }
        store.zero_grads();
    }
}
