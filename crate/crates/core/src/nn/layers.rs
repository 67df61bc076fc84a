use ndarray::{Array1, Array2, Array3, ArrayD, Axis, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{cast, join, Float, Mode, Module, Param};

#[derive(Debug, Clone, Default)]
pub struct Relu<F> {
    out: Option<Array3<F>>,
}

impl<F: Float> Relu<F> {
    pub fn new() -> Self {
        Self { out: None }
    }

    pub fn forward(&mut self, x: &Array3<F>, mode: Mode) -> Array3<F> {
        let y = x.mapv(|v| v.max(F::zero()));
        if mode == Mode::Train {
            self.out = Some(y.clone());
        }
        y
    }

    pub fn backward(&mut self, dy: &Array3<F>) -> Array3<F> {
        let y = self.out.take().expect("backward without a training forward pass");
        let mut dx = dy.clone();
        dx.zip_mut_with(&y, |g, &v| {
            if v <= F::zero() {
                *g = F::zero()
            }
        });
        dx
    }
}

/// Nearest-neighbour upsampling along time by a factor of two.
#[derive(Debug, Clone, Copy, Default)]
pub struct Upsample2;

impl Upsample2 {
    pub fn forward<F: Float>(&self, x: &Array3<F>) -> Array3<F> {
        let (b, c, t) = x.dim();
        Array3::from_shape_fn((b, c, 2 * t), |(i, j, k)| x[(i, j, k / 2)])
    }

    pub fn backward<F: Float>(&self, dy: &Array3<F>) -> Array3<F> {
        let (b, c, t2) = dy.dim();
        Array3::from_shape_fn((b, c, t2 / 2), |(i, j, k)| dy[(i, j, 2 * k)] + dy[(i, j, 2 * k + 1)])
    }
}

/// Batch normalisation over batch and time, per channel.
#[derive(Debug, Clone)]
pub struct BatchNorm1d<F> {
    pub gamma: Param<F>,
    pub beta: Param<F>,
    pub running_mean: Param<F>,
    pub running_var: Param<F>,
    eps: f64,
    momentum: f64,
    cache: Option<(Array3<F>, Array1<F>)>,
}

impl<F: Float> BatchNorm1d<F> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::new(ArrayD::ones(IxDyn(&[channels]))),
            beta: Param::new(ArrayD::zeros(IxDyn(&[channels]))),
            running_mean: Param::buffer(ArrayD::zeros(IxDyn(&[channels]))),
            running_var: Param::buffer(ArrayD::ones(IxDyn(&[channels]))),
            eps: 1e-5,
            momentum: 0.1,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Array3<F>, mode: Mode) -> Array3<F> {
        let (b, c, t) = x.dim();
        let n = (b * t) as f64;
        let (mean, var) = match mode {
            Mode::Train => {
                let mean = x.sum_axis(Axis(2)).sum_axis(Axis(0)) / cast::<F>(n);
                let mut var = Array1::<F>::zeros(c);
                for ((_, ch, _), v) in x.indexed_iter() {
                    let d = *v - mean[ch];
                    var[ch] += d * d;
                }
                let var = var / cast::<F>(n);
                let m = cast::<F>(self.momentum);
                let unbias = if n > 1.0 { cast::<F>(n / (n - 1.0)) } else { F::one() };
                for ch in 0..c {
                    let rm = &mut self.running_mean.value[[ch]];
                    *rm = (F::one() - m) * *rm + m * mean[ch];
                    let rv = &mut self.running_var.value[[ch]];
                    *rv = (F::one() - m) * *rv + m * var[ch] * unbias;
                }
                (mean, var)
            }
            Mode::Eval => (
                Array1::from_iter(self.running_mean.value.iter().copied()),
                Array1::from_iter(self.running_var.value.iter().copied()),
            ),
        };
        let eps = cast::<F>(self.eps);
        let inv_std = var.mapv(|v| F::one() / (v + eps).sqrt());
        let xhat = Array3::from_shape_fn((b, c, t), |(i, ch, k)| (x[(i, ch, k)] - mean[ch]) * inv_std[ch]);
        let y = Array3::from_shape_fn((b, c, t), |(i, ch, k)| {
            self.gamma.value[[ch]] * xhat[(i, ch, k)] + self.beta.value[[ch]]
        });
        if mode == Mode::Train {
            self.cache = Some((xhat, inv_std));
        }
        y
    }

    pub fn backward(&mut self, dy: &Array3<F>) -> Array3<F> {
        let (xhat, inv_std) = self.cache.take().expect("backward without a training forward pass");
        let (b, c, t) = dy.dim();
        let n = cast::<F>((b * t) as f64);
        let mut sum_dy = Array1::<F>::zeros(c);
        let mut sum_dy_xhat = Array1::<F>::zeros(c);
        for ((i, ch, k), g) in dy.indexed_iter() {
            sum_dy[ch] += *g;
            sum_dy_xhat[ch] += *g * xhat[(i, ch, k)];
        }
        for ch in 0..c {
            self.gamma.grad[[ch]] += sum_dy_xhat[ch];
            self.beta.grad[[ch]] += sum_dy[ch];
        }
        Array3::from_shape_fn((b, c, t), |(i, ch, k)| {
            let g = self.gamma.value[[ch]];
            g * inv_std[ch] / n * (n * dy[(i, ch, k)] - sum_dy[ch] - xhat[(i, ch, k)] * sum_dy_xhat[ch])
        })
    }
}

impl<F: Float> Module<F> for BatchNorm1d<F> {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        f(&join(prefix, "gamma"), &mut self.gamma);
        f(&join(prefix, "beta"), &mut self.beta);
        f(&join(prefix, "running_mean"), &mut self.running_mean);
        f(&join(prefix, "running_var"), &mut self.running_var);
    }
}

/// Max pooling with kernel 3, stride 2, padding 1.
#[derive(Debug, Clone, Default)]
pub struct MaxPool1d {
    argmax: Option<(Array3<usize>, usize)>,
}

impl MaxPool1d {
    pub fn new() -> Self {
        Self { argmax: None }
    }

    pub fn output_len(t: usize) -> usize {
        (t + 2 - 3) / 2 + 1
    }

    pub fn forward<F: Float>(&mut self, x: &Array3<F>, mode: Mode) -> Array3<F> {
        let (b, c, t) = x.dim();
        let t_out = Self::output_len(t);
        let mut idx = Array3::<usize>::zeros((b, c, t_out));
        let y = Array3::from_shape_fn((b, c, t_out), |(i, ch, o)| {
            let lo = (2 * o).saturating_sub(1);
            let hi = (2 * o + 1).min(t - 1);
            let mut best = lo;
            for k in lo + 1..=hi {
                if x[(i, ch, k)] > x[(i, ch, best)] {
                    best = k;
                }
            }
            idx[(i, ch, o)] = best;
            x[(i, ch, best)]
        });
        if mode == Mode::Train {
            self.argmax = Some((idx, t));
        }
        y
    }

    pub fn backward<F: Float>(&mut self, dy: &Array3<F>) -> Array3<F> {
        let (idx, t) = self.argmax.take().expect("backward without a training forward pass");
        let (b, c, _) = dy.dim();
        let mut dx = Array3::zeros((b, c, t));
        for ((i, ch, o), g) in dy.indexed_iter() {
            dx[(i, ch, idx[(i, ch, o)])] += *g;
        }
        dx
    }
}

/// Inverted dropout with its own seeded generator.
#[derive(Debug, Clone)]
pub struct Dropout<F> {
    p: f64,
    rng: ChaCha8Rng,
    mask: Option<Array3<F>>,
}

impl<F: Float> Dropout<F> {
    pub fn new(p: f64, seed: u64) -> Self {
        assert!((0.0..1.0).contains(&p));
        Self { p, rng: ChaCha8Rng::seed_from_u64(seed), mask: None }
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn forward(&mut self, x: &Array3<F>, mode: Mode) -> Array3<F> {
        if mode == Mode::Eval || self.p == 0.0 {
            self.mask = (mode == Mode::Train).then(|| Array3::from_elem(x.dim(), F::one()));
            return x.clone();
        }
        let keep = cast::<F>(1.0 / (1.0 - self.p));
        let mask = Array3::from_shape_simple_fn(x.dim(), || if self.rng.gen_bool(1.0 - self.p) { keep } else { F::zero() });
        let y = x * &mask;
        self.mask = Some(mask);
        y
    }

    pub fn backward(&mut self, dy: &Array3<F>) -> Array3<F> {
        let mask = self.mask.take().expect("backward without a training forward pass");
        dy * &mask
    }
}

/// Mean over time: `(B, C, T)` to `(B, C)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AvgPool {
    t: usize,
}

impl AvgPool {
    pub fn forward<F: Float>(&mut self, x: &Array3<F>) -> Array2<F> {
        self.t = x.dim().2;
        x.mean_axis(Axis(2)).expect("non-empty time axis")
    }

    pub fn backward<F: Float>(&self, dy: &Array2<F>) -> Array3<F> {
        let (b, c) = dy.dim();
        let scale = cast::<F>(1.0 / self.t as f64);
        Array3::from_shape_fn((b, c, self.t), |(i, ch, _)| dy[(i, ch)] * scale)
    }
}

#[derive(Debug, Clone)]
pub struct Linear<F> {
    pub weight: Param<F>,
    pub bias: Param<F>,
    input: Option<Array2<F>>,
}

impl<F: Float> Linear<F> {
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Self {
            weight: Param::uniform(&[outputs, inputs], bound, rng),
            bias: Param::uniform(&[outputs], bound, rng),
            input: None,
        }
    }

    fn w(&self) -> ndarray::ArrayView2<'_, F> {
        self.weight.value.view().into_dimensionality().expect("2-D weight")
    }

    pub fn forward(&mut self, x: &Array2<F>, mode: Mode) -> Array2<F> {
        let bias = self.bias.value.view().into_dimensionality::<ndarray::Ix1>().expect("1-D bias");
        let y = x.dot(&self.w().t()) + &bias;
        if mode == Mode::Train {
            self.input = Some(x.clone());
        }
        y
    }

    pub fn backward(&mut self, dy: &Array2<F>) -> Array2<F> {
        let x = self.input.take().expect("backward without a training forward pass");
        let gw = dy.t().dot(&x);
        let mut gw_view = self.weight.grad.view_mut().into_dimensionality::<ndarray::Ix2>().expect("2-D");
        gw_view += &gw;
        let mut gb = self.bias.grad.view_mut().into_dimensionality::<ndarray::Ix1>().expect("1-D");
        gb += &dy.sum_axis(Axis(0));
        dy.dot(&self.w())
    }
}

impl<F: Float> Module<F> for Linear<F> {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}
