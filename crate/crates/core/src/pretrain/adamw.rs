//! Adam with decoupled weight decay.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub config: AdamWConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamW {
    /// Zeroed moments shaped like `params`.
    pub fn new<'a>(config: AdamWConfig, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let (m, v) = params
            .into_iter()
            .map(|t| (vec![0.0; t.len()], vec![0.0; t.len()]))
            .unzip();
        AdamW { config, m, v, step: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update at learning rate `lr`:
    ///
    /// `θ ← θ − lr · (m̂ / (√v̂ + ε) + λ·θ)`
    ///
    /// Decay applies to matrices only; biases, gains and other vectors are
    /// not decayed.
    pub fn update(&mut self, params: Vec<&mut Tensor>, grads: &[Vec<f64>], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - math::powf(c.beta1, self.step as f64);
        let bc2 = 1.0 - math::powf(c.beta2, self.step as f64);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let decay = if p.rank() >= 2 { c.weight_decay } else { 0.0 };
            for (((x, &gi), mi), vi) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = c.beta1 * *mi + (1.0 - c.beta1) * gi;
                *vi = c.beta2 * *vi + (1.0 - c.beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *x -= lr * (mhat / (math::sqrt(vhat) + c.eps) + decay * *x);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lr_leaves_params() {
        let mut w = Tensor::filled(&[2, 2], 0.7);
        let mut opt = AdamW::new(AdamWConfig::default(), [&w]);
        opt.update(vec![&mut w], &[vec![1.0, -2.0, 3.0, 0.0]], 0.0);
        assert_eq!(w, Tensor::filled(&[2, 2], 0.7));
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn no_decay_first_step_is_adam() {
        // step 1: m̂ = g, v̂ = g², so Δ = -lr · g / (|g| + eps)
        let cfg = AdamWConfig { weight_decay: 0.0, ..Default::default() };
        let mut w = Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let mut opt = AdamW::new(cfg, [&w]);
        let g = vec![0.5, -4.0, 1e-3];
        opt.update(vec![&mut w], &[g.clone()], 0.1);
        for (i, (&x, &gi)) in w.data().iter().zip(&g).enumerate() {
            let expected = (i + 1) as f64 - 0.1 * gi / (gi.abs() + 1e-8);
            assert!((x - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn decay_is_decoupled() {
        // zero gradient: only the decay term moves the matrix
        let cfg = AdamWConfig { weight_decay: 0.1, ..Default::default() };
        let mut w = Tensor::filled(&[2, 1], 2.0);
        let mut b = Tensor::filled(&[2], 2.0);
        let mut opt = AdamW::new(cfg, [&w, &b]);
        opt.update(vec![&mut w, &mut b], &[vec![0.0; 2], vec![0.0; 2]], 0.5);
        assert!((w.data()[0] - (2.0 - 0.5 * 0.1 * 2.0)).abs() < 1e-12);
        assert_eq!(b.data(), &[2.0, 2.0]);
    }
}
