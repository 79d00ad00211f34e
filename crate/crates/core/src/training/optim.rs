use alloc::vec::Vec;

use crate::math::{cos, powi, sqrt};
use crate::tensor::{Matrix, ParamStore};

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u32,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    /// Zeroed moments shaped like every parameter in `store`.
    pub fn new(store: &ParamStore) -> Self {
        let shaped: Vec<Matrix> = store
            .iter()
            .map(|(_, p)| Matrix::zeros(p.value.rows(), p.value.cols()))
            .collect();
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shaped.clone(),
            v: shaped,
        }
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    /// Updates every trainable parameter that holds a gradient. Gradients are left
    /// in place; the caller zeroes them.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - powi(self.beta1, self.t as i32);
        let c2 = 1.0 - powi(self.beta2, self.t as i32);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let p = store.get_mut(id);
            let (Some(g), true) = (p.grad.as_ref(), p.requires_grad) else {
                continue;
            };
            let i = id.index();
            let (m, v) = (self.m[i].as_mut_slice(), self.v[i].as_mut_slice());
            for (k, (&gk, theta)) in g.as_slice().iter().zip(p.value.as_mut_slice()).enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                *theta -= lr * (m[k] / c1) / (sqrt(v[k] / c2) + self.eps);
            }
        }
    }
}

/// `lr_min + (lr_max - lr_min)(1 + cos(pi epoch / epochs)) / 2`.
pub fn cosine_lr(epoch: usize, epochs: usize, lr_max: f64, lr_min: f64) -> f64 {
    if epochs == 0 {
        return lr_max;
    }
    let frac = epoch.min(epochs) as f64 / epochs as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + cos(core::f64::consts::PI * frac))
}
