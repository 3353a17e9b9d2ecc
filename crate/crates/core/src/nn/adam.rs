use serde::{Deserialize, Serialize};

use crate::nn::{NnError, Param};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay `p ← p − lr·wd·p`; otherwise `wd·p` is added to the gradient.
    pub decoupled: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, weight_decay: 5e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, decoupled: true }
    }
}

/// Adam with bias correction; moment buffers are allocated on the first step.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, step: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn step(&mut self, params: &mut [&mut Param<T>]) -> Result<(), NnError> {
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len() || self.first.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len()) {
            return Err(NnError::ShapeMismatch("parameter set changed between Adam steps".into()));
        }
        for p in params.iter() {
            if p.value.shape() != p.grad.shape() {
                return Err(NnError::ShapeMismatch("gradient shape differs from parameter".into()));
            }
        }
        self.step += 1;
        let c = self.config;
        let lr = T::from_f64_lossy(c.lr);
        let wd = T::from_f64_lossy(c.weight_decay);
        let b1 = T::from_f64_lossy(c.beta1);
        let b2 = T::from_f64_lossy(c.beta2);
        let eps = T::from_f64_lossy(c.eps);
        let one = T::one();
        let step = self.step as i32;
        let corr1 = one - T::from_f64_lossy(c.beta1.powi(step));
        let corr2 = one - T::from_f64_lossy(c.beta2.powi(step));
        let (inv1, inv2) = (one / corr1, one / corr2);
        let (one_b1, one_b2) = (one - b1, one - b2);
        let tiny = T::min_positive_value();
        let (shrink, coupled) = if c.decoupled { (one - lr * wd, T::zero()) } else { (one, wd) };
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let Param { value, grad } = &mut **p;
            for (((w, &g0), mi), vi) in value.as_mut_slice().iter_mut().zip(grad.as_slice()).zip(m.iter_mut()).zip(v.iter_mut()) {
                let g = g0 + coupled * *w;
                *w *= shrink;
                *mi = b1 * *mi + one_b1 * g;
                *vi = b2 * *vi + one_b2 * g * g;
                // decaying moments of never-updated entries would turn subnormal
                if mi.abs() < tiny {
                    *mi = T::zero();
                }
                *w -= lr * (*mi * inv1) / ((*vi * inv2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
