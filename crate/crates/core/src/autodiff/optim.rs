use super::{Grads, ParamStore, Tensor};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(5.0),
        }
    }
}

/// Adam with global-norm gradient clipping. Moment estimates persist across steps.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Option<Tensor>>,
    v: Vec<Option<Tensor>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Clips `grads` in place to the configured global norm, then applies one
    /// update to every trainable parameter that has a gradient. Returns the
    /// pre-clip global norm.
    pub fn step(&mut self, params: &mut ParamStore, grads: &mut Grads) -> Result<f64> {
        if grads.len() != params.len() {
            return Err(Error::Contract(format!(
                "gradient buffer has {} slots for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        let norm = grads.global_norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite {
                op: "adam gradient norm",
            });
        }
        if let Some(max) = self.config.clip_norm {
            if norm > max {
                grads.scale(max / norm);
            }
        }
        if self.m.len() < params.len() {
            self.m.resize(params.len(), None);
            self.v.resize(params.len(), None);
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            ..
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (id, g) in grads.iter() {
            if !params.is_trainable(id) {
                continue;
            }
            let (rows, cols) = g.shape();
            let m = self.m[id.0].get_or_insert_with(|| Tensor::zeros(rows, cols));
            let v = self.v[id.0].get_or_insert_with(|| Tensor::zeros(rows, cols));
            let w = params.get_mut(id);
            for (((wi, mi), vi), &gi) in w
                .data_mut()
                .iter_mut()
                .zip(m.data_mut())
                .zip(v.data_mut())
                .zip(g.data())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *wi -= lr * mhat / (vhat.sqrt() + eps);
            }
            if !w.is_finite() {
                return Err(Error::NonFinite { op: "adam update" });
            }
        }
        Ok(norm)
    }
}
