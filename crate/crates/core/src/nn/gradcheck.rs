//! Central finite-difference gradient checking for `f64` models.

use super::{Module, Param};

/// Agreement between analytic and numeric gradients of one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub elements: usize,
    /// `‖analytic - numeric‖ / max(‖analytic‖, ‖numeric‖, 1e-6)`.
    pub rel_error: f64,
}

fn with_param<M: Module<f64>>(model: &mut M, index: usize, mut f: impl FnMut(&mut Param<f64>)) {
    let mut k = 0;
    model.visit("", &mut |_, p| {
        if p.trainable {
            if k == index {
                f(p);
            }
            k += 1;
        }
    });
}

/// Compare the gradients produced by `loss(model, true)` with central
/// differences of `loss(model, false)`, for every trainable tensor.
///
/// `loss` must run a full forward pass in training mode and return the
/// scalar loss; when its flag is set it must also run the backward pass,
/// accumulating into the params' gradients. It must be deterministic.
pub fn check_gradients<M: Module<f64>>(
    model: &mut M,
    mut loss: impl FnMut(&mut M, bool) -> f64,
    eps: f64,
) -> Vec<TensorCheck> {
    model.zero_grad();
    loss(model, true);
    let mut analytic = Vec::new();
    model.visit("", &mut |name, p| {
        if p.trainable {
            analytic.push((name.to_string(), p.grad.iter().copied().collect::<Vec<_>>()));
        }
    });

    let mut out = Vec::with_capacity(analytic.len());
    for (index, (name, grad)) in analytic.into_iter().enumerate() {
        let mut numeric = Vec::with_capacity(grad.len());
        for i in 0..grad.len() {
            let mut orig = 0.0;
            with_param(model, index, |p| {
                let v = p.value.as_slice_mut().expect("contiguous param");
                orig = v[i];
                v[i] = orig + eps;
            });
            let plus = loss(model, false);
            with_param(model, index, |p| p.value.as_slice_mut().expect("contiguous")[i] = orig - eps);
            let minus = loss(model, false);
            with_param(model, index, |p| p.value.as_slice_mut().expect("contiguous")[i] = orig);
            numeric.push((plus - minus) / (2.0 * eps));
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = grad.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let rel_error = norm(&diff) / norm(&grad).max(norm(&numeric)).max(1e-6);
        out.push(TensorCheck { name, elements: grad.len(), rel_error });
    }
    model.zero_grad();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{
        cross_entropy, smooth_l1, AvgPool, BatchNorm1d, Conv1d, Dropout, Linear, MaxPool1d, Mode, Relu, Upsample2,
    };
    use crate::nn::join;
    use ndarray::{Array2, Array3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Every layer type chained together.
    struct Toy {
        conv: Conv1d<f64>,
        bn: BatchNorm1d<f64>,
        relu: Relu<f64>,
        pool: MaxPool1d,
        drop: Dropout<f64>,
        up: Upsample2,
        conv2: Conv1d<f64>,
        avg: AvgPool,
        fc: Linear<f64>,
    }

    impl Module<f64> for Toy {
        fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<f64>)) {
            self.conv.visit(&join(prefix, "conv"), f);
            self.bn.visit(&join(prefix, "bn"), f);
            self.conv2.visit(&join(prefix, "conv2"), f);
            self.fc.visit(&join(prefix, "fc"), f);
        }
    }

    #[test]
    fn every_layer_passes_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut toy = Toy {
            conv: Conv1d::new(3, 4, 3, &mut rng).padding(2).dilation(2),
            bn: BatchNorm1d::new(4),
            relu: Relu::new(),
            pool: MaxPool1d::new(),
            drop: Dropout::new(0.5, 0),
            up: Upsample2,
            conv2: Conv1d::new(4, 5, 4, &mut rng).stride(2).padding(1),
            avg: AvgPool::default(),
            fc: Linear::new(5, 3, &mut rng),
        };
        toy.bn.gamma.value.mapv_inplace(|_| rng.gen_range(0.5..1.5));
        let x = Array3::from_shape_simple_fn((2, 3, 10), || rng.gen_range(-1.0..1.0));
        let target = Array3::from_shape_simple_fn((2, 4, 10), || rng.gen_range(-1.0..1.0));
        let mask = Array2::ones((2, 10));
        let checks = check_gradients(
            &mut toy,
            |m, backward| {
                m.drop.reseed(5);
                let h = m.conv.forward(&x, Mode::Train);
                let (recon, g_recon) = smooth_l1(&h, &target, &mask, 0..4);
                let h = m.bn.forward(&h, Mode::Train);
                let h = m.relu.forward(&h, Mode::Train);
                let h = m.pool.forward(&h, Mode::Train);
                let h = m.drop.forward(&h, Mode::Train);
                let h = m.up.forward(&h);
                let h = m.conv2.forward(&h, Mode::Train);
                let z = m.avg.forward(&h);
                let logits = m.fc.forward(&z, Mode::Train);
                let (ce, g) = cross_entropy(&logits, &[2, 0]);
                if backward {
                    let g = m.fc.backward(&g);
                    let g = m.avg.backward(&g);
                    let g = m.conv2.backward(&g);
                    let g = m.up.backward(&g);
                    let g = m.drop.backward(&g);
                    let g = m.pool.backward(&g);
                    let g = m.relu.backward(&g);
                    let g = m.bn.backward(&g) + &g_recon;
                    m.conv.backward(&g);
                }
                ce + recon
            },
            1e-6,
        );
        assert_eq!(checks.len(), 8);
        for c in &checks {
            assert!(c.rel_error < 1e-4, "{c:?}");
        }
    }
}
