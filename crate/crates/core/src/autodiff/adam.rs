use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamStore};
use crate::tensor::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.002,
            beta1: 0.9,
            beta2: 0.9,
            eps: 1e-7,
        }
    }
}

/// Bias-corrected ADAM with first and second moments per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, params: &ParamStore<T>) -> Self {
        let zeros = || {
            params
                .ids()
                .map(|id| vec![T::zero(); params.get(id).len()])
                .collect::<Vec<_>>()
        };
        Adam {
            config,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn lr(&self) -> f64 {
        self.config.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// One update. `l2[p]` is the L2 rate of parameter `p`; its gradient
    /// `2·λ·w` is added before the moments are updated.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &Gradients<T>, l2: &[f64]) {
        self.t += 1;
        let c = self.config;
        let b1 = T::from_f64(c.beta1);
        let b2 = T::from_f64(c.beta2);
        let one = T::one();
        let bc1 = T::from_f64(1.0 - Float::powi(c.beta1, self.t as i32));
        let bc2 = T::from_f64(1.0 - Float::powi(c.beta2, self.t as i32));
        let lr = T::from_f64(c.lr);
        let eps = T::from_f64(c.eps);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let lam = T::from_f64(2.0 * l2.get(id.0).copied().unwrap_or(0.0));
            let g = grads.get(id);
            let w = params.get_mut(id).data_mut();
            let m = &mut self.m[id.0];
            let v = &mut self.v[id.0];
            for i in 0..w.len() {
                let gi = g[i] + lam * w[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                w[i] = w[i] - lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
