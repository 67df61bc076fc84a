use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

use super::{cast, Float, Module};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

/// Adam with decoupled weight decay. State is kept per trainable param in
/// visiting order.
#[derive(Debug, Clone)]
pub struct AdamW<F> {
    pub config: AdamWConfig,
    step: u64,
    state: Vec<(ArrayD<F>, ArrayD<F>)>,
}

impl<F: Float> AdamW<F> {
    pub fn new(config: AdamWConfig) -> Self {
        Self { config, step: 0, state: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, model: &mut impl Module<F>, lr: f64) {
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let (b1, b2) = (cast::<F>(c.beta1), cast::<F>(c.beta2));
        let step_size = cast::<F>(lr / bc1);
        let bc2_sqrt = cast::<F>(bc2.sqrt());
        let eps = cast::<F>(c.eps);
        let decay = cast::<F>(1.0 - lr * c.weight_decay);
        let mut k = 0;
        let state = &mut self.state;
        model.visit("", &mut |_, p| {
            if !p.trainable {
                return;
            }
            if state.len() == k {
                state.push((ArrayD::zeros(p.value.raw_dim()), ArrayD::zeros(p.value.raw_dim())));
            }
            let (m, v) = &mut state[k];
            k += 1;
            ndarray::Zip::from(&mut p.value).and(&p.grad).and(m).and(v).for_each(|w, &g, m, v| {
                *m = b1 * *m + (F::one() - b1) * g;
                *v = b2 * *v + (F::one() - b2) * g * g;
                *w = *w * decay - step_size * *m / ((*v).sqrt() / bc2_sqrt + eps);
            });
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{join, Param};
    use ndarray::{ArrayD, IxDyn};

    struct Scalar(Param<f64>);

    impl Module<f64> for Scalar {
        fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<f64>)) {
            f(&join(prefix, "w"), &mut self.0);
        }
    }

    #[test]
    fn first_step_moves_by_lr_against_the_gradient() {
        let mut m = Scalar(Param::new(ArrayD::from_elem(IxDyn(&[1]), 1.0)));
        m.0.grad[[0]] = 0.3;
        let mut opt = AdamW::new(AdamWConfig { weight_decay: 0.0, ..Default::default() });
        opt.step(&mut m, 0.1);
        assert!((m.0.value[[0]] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn decoupled_decay_shrinks_without_gradient() {
        let mut m = Scalar(Param::new(ArrayD::from_elem(IxDyn(&[1]), 2.0)));
        let mut opt = AdamW::new(AdamWConfig { weight_decay: 0.5, ..Default::default() });
        opt.step(&mut m, 0.1);
        assert!((m.0.value[[0]] - 2.0 * 0.95).abs() < 1e-12);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut m = Scalar(Param::new(ArrayD::from_elem(IxDyn(&[1]), 5.0)));
        let mut opt = AdamW::new(AdamWConfig { weight_decay: 0.0, ..Default::default() });
        for _ in 0..2000 {
            let w = m.0.value[[0]];
            m.0.grad[[0]] = 2.0 * (w - 1.5);
            opt.step(&mut m, 0.05);
        }
        assert!((m.0.value[[0]] - 1.5).abs() < 1e-3);
    }
}
