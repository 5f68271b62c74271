//! Adam optimizer over flat tensor groups.

use alloc::vec;
use alloc::vec::Vec;

use crate::numeric::{powf, sqrt};

#[derive(Clone, Debug)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(sizes: &[usize], beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            t: 0,
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Applies one update. `params[i]` and `grads[i]` must match the sizes the
    /// optimizer was built with, in the same order every step.
    pub fn step(&mut self, lr: f64, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - powf(self.beta1, self.t as f64);
        let bc2 = 1.0 - powf(self.beta2, self.t as f64);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            debug_assert_eq!(p.len(), m.len());
            debug_assert_eq!(g.len(), m.len());
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= lr * mhat / (sqrt(vhat) + self.eps);
            }
        }
    }

    /// Moment tensors for checkpointing, flattened group by group.
    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    /// Restores a checkpointed optimizer.
    pub fn restore(
        sizes: &[usize],
        beta1: f64,
        beta2: f64,
        eps: f64,
        t: u64,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    ) -> Self {
        assert_eq!(m.len(), sizes.len());
        assert_eq!(v.len(), sizes.len());
        for (i, &s) in sizes.iter().enumerate() {
            assert_eq!(m[i].len(), s);
            assert_eq!(v[i].len(), s);
        }
        Self {
            beta1,
            beta2,
            eps,
            t,
            m,
            v,
        }
    }
}
