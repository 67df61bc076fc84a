use ndarray::{Array2, Array3, ArrayView2};
use rand::Rng;

use super::{join, Float, Mode, Module, Param};

/// 1D convolution via im2col and one matrix product per batch.
#[derive(Debug, Clone)]
pub struct Conv1d<F> {
    pub weight: Param<F>,
    pub bias: Param<F>,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    dilation: usize,
    cache: Option<ConvCache<F>>,
}

#[derive(Debug, Clone)]
struct ConvCache<F> {
    cols: Array2<F>,
    batch: usize,
    t_in: usize,
    t_out: usize,
}

impl<F: Float> Conv1d<F> {
    /// Weights and bias uniform in `±1/sqrt(in_ch * kernel)`.
    pub fn new(in_ch: usize, out_ch: usize, kernel: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / ((in_ch * kernel) as f64).sqrt();
        Self {
            weight: Param::uniform(&[out_ch, in_ch, kernel], bound, rng),
            bias: Param::uniform(&[out_ch], bound, rng),
            in_ch,
            out_ch,
            kernel,
            stride: 1,
            padding: 0,
            dilation: 1,
            cache: None,
        }
    }

    pub fn stride(mut self, s: usize) -> Self {
        assert!(s >= 1);
        self.stride = s;
        self
    }

    pub fn padding(mut self, p: usize) -> Self {
        self.padding = p;
        self
    }

    pub fn dilation(mut self, d: usize) -> Self {
        assert!(d >= 1);
        self.dilation = d;
        self
    }

    pub fn in_channels(&self) -> usize {
        self.in_ch
    }

    pub fn out_channels(&self) -> usize {
        self.out_ch
    }

    /// Output length for an input of length `t`, if positive.
    pub fn output_len(&self, t: usize) -> Option<usize> {
        let span = self.dilation * (self.kernel - 1) + 1;
        let padded = t + 2 * self.padding;
        (padded >= span).then(|| (padded - span) / self.stride + 1)
    }

    fn im2col(&self, x: &Array3<F>, t_out: usize) -> Array2<F> {
        let (b, c, t) = x.dim();
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let n = b * t_out;
        let mut cols = vec![F::zero(); c * self.kernel * n];
        for ci in 0..c {
            for kk in 0..self.kernel {
                let row = ci * self.kernel + kk;
                let off = (kk * self.dilation) as isize - self.padding as isize;
                for bi in 0..b {
                    let src = &xs[(bi * c + ci) * t..][..t];
                    let dst = &mut cols[row * n + bi * t_out..][..t_out];
                    for (to, d) in dst.iter_mut().enumerate() {
                        let ti = (to * self.stride) as isize + off;
                        if ti >= 0 && (ti as usize) < t {
                            *d = src[ti as usize];
                        }
                    }
                }
            }
        }
        Array2::from_shape_vec((c * self.kernel, n), cols).expect("shape")
    }

    fn weight_matrix(&self) -> ArrayView2<'_, F> {
        self.weight
            .value
            .view()
            .into_shape_with_order((self.out_ch, self.in_ch * self.kernel))
            .expect("weight is contiguous")
    }

    pub fn forward(&mut self, x: &Array3<F>, mode: Mode) -> Array3<F> {
        let (b, c, t) = x.dim();
        assert_eq!(c, self.in_ch, "conv input channels");
        let t_out = self.output_len(t).expect("input shorter than the kernel span");
        let cols = self.im2col(x, t_out);
        let y2 = self.weight_matrix().dot(&cols);
        let bias = self.bias.value.as_slice().expect("contiguous");
        let mut y = Array3::zeros((b, self.out_ch, t_out));
        for ((bi, co, to), v) in y.indexed_iter_mut() {
            *v = y2[(co, bi * t_out + to)] + bias[co];
        }
        self.cache = (mode == Mode::Train).then_some(ConvCache { cols, batch: b, t_in: t, t_out });
        y
    }

    pub fn backward(&mut self, dy: &Array3<F>) -> Array3<F> {
        let cache = self.cache.take().expect("backward without a training forward pass");
        let (b, t_out) = (cache.batch, cache.t_out);
        assert_eq!(dy.dim(), (b, self.out_ch, t_out));
        let n = b * t_out;
        let mut dy2 = Array2::zeros((self.out_ch, n));
        for ((bi, co, to), v) in dy.indexed_iter() {
            dy2[(co, bi * t_out + to)] = *v;
        }
        {
            let gb = self.bias.grad.as_slice_mut().expect("contiguous");
            for (co, row) in dy2.rows().into_iter().enumerate() {
                gb[co] += row.sum();
            }
        }
        let gw = dy2.dot(&cache.cols.t());
        let mut gw_view = self
            .weight
            .grad
            .view_mut()
            .into_shape_with_order((self.out_ch, self.in_ch * self.kernel))
            .expect("contiguous");
        gw_view += &gw;

        let dcols = self.weight_matrix().t().dot(&dy2);
        let t = cache.t_in;
        let mut dx = vec![F::zero(); b * self.in_ch * t];
        let dcols = dcols.as_standard_layout();
        let ds = dcols.as_slice().expect("standard layout");
        for ci in 0..self.in_ch {
            for kk in 0..self.kernel {
                let row = ci * self.kernel + kk;
                let off = (kk * self.dilation) as isize - self.padding as isize;
                for bi in 0..b {
                    let src = &ds[row * n + bi * t_out..][..t_out];
                    let dst = &mut dx[(bi * self.in_ch + ci) * t..][..t];
                    for (to, g) in src.iter().enumerate() {
                        let ti = (to * self.stride) as isize + off;
                        if ti >= 0 && (ti as usize) < t {
                            dst[ti as usize] += *g;
                        }
                    }
                }
            }
        }
        Array3::from_shape_vec((b, self.in_ch, t), dx).expect("shape")
    }
}

impl<F: Float> Module<F> for Conv1d<F> {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

/// Direct nested-loop convolution used as a reference in tests.
#[cfg(test)]
pub(crate) fn naive_conv<F: Float>(conv: &Conv1d<F>, x: &Array3<F>) -> Array3<F> {
    let (b, _, t) = x.dim();
    let t_out = conv.output_len(t).unwrap();
    let w = conv.weight.value.view().into_dimensionality::<ndarray::Ix3>().unwrap();
    let mut y = Array3::zeros((b, conv.out_ch, t_out));
    for bi in 0..b {
        for co in 0..conv.out_ch {
            for to in 0..t_out {
                let mut acc = conv.bias.value[[co]];
                for ci in 0..conv.in_ch {
                    for kk in 0..conv.kernel {
                        let ti = (to * conv.stride + kk * conv.dilation) as isize - conv.padding as isize;
                        if ti >= 0 && (ti as usize) < t {
                            acc += w[(co, ci, kk)] * x[(bi, ci, ti as usize)];
                        }
                    }
                }
                y[(bi, co, to)] = acc;
            }
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(shape: (usize, usize, usize), rng: &mut impl Rng) -> Array3<f64> {
        Array3::from_shape_simple_fn(shape, || rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn matches_nested_loops_for_all_geometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (k, s, p, d) in [(3, 1, 1, 1), (4, 2, 1, 1), (3, 1, 9, 9), (1, 1, 0, 1), (7, 2, 3, 1), (3, 2, 0, 2)] {
            let mut conv = Conv1d::<f64>::new(3, 5, k, &mut rng).stride(s).padding(p).dilation(d);
            let x = random((2, 3, 20), &mut rng);
            let fast = conv.forward(&x, Mode::Eval);
            let slow = naive_conv(&conv, &x);
            assert_eq!(fast.dim(), slow.dim());
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn output_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let down = Conv1d::<f32>::new(1, 1, 4, &mut rng).stride(2).padding(1);
        assert_eq!(down.output_len(64), Some(32));
        assert_eq!(down.output_len(16), Some(8));
        let dil = Conv1d::<f32>::new(1, 1, 3, &mut rng).padding(9).dilation(9);
        assert_eq!(dil.output_len(16), Some(16));
        let stem = Conv1d::<f32>::new(1, 1, 7, &mut rng).stride(2).padding(3);
        assert_eq!(stem.output_len(8), Some(4));
    }

    #[test]
    fn backward_is_the_adjoint_of_forward() {
        // <dy, conv(x) - bias> == <conv^T(dy), x> for the linear part
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut conv = Conv1d::<f64>::new(4, 3, 4, &mut rng).stride(2).padding(1);
        let x = random((2, 4, 12), &mut rng);
        let y = conv.forward(&x, Mode::Train);
        let dy = random(y.dim(), &mut rng);
        let dx = conv.backward(&dy);
        let lin: f64 = y.indexed_iter().map(|((_, c, _), v)| v - conv.bias.value[[c]]).zip(dy.iter()).map(|(a, b)| a * b).sum();
        let adj: f64 = dx.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        assert!((lin - adj).abs() < 1e-10);
    }
}
