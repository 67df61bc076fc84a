use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{cast, Float};

/// `K` code vectors with exponential-moving-average statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<F> {
    codes: Array2<F>,
    ema_size: Array1<F>,
    ema_sum: Array2<F>,
    initialized: bool,
}

impl<F: Float> Codebook<F> {
    /// An all-zero codebook awaiting [`init_from`](Self::init_from).
    pub fn new(size: usize, dim: usize) -> Self {
        Self {
            codes: Array2::zeros((size, dim)),
            ema_size: Array1::ones(size),
            ema_sum: Array2::zeros((size, dim)),
            initialized: false,
        }
    }

    /// A codebook with the given codes; EMA sizes start at 1 and sums at the codes.
    pub fn from_codes(codes: Array2<F>) -> Self {
        let k = codes.nrows();
        Self { ema_sum: codes.clone(), ema_size: Array1::ones(k), codes, initialized: true }
    }

    pub(crate) fn from_parts(codes: Array2<F>, ema_size: Array1<F>, ema_sum: Array2<F>) -> Result<Self> {
        if ema_size.len() != codes.nrows() || ema_sum.dim() != codes.dim() {
            return Err(Error::Shape("codebook statistics do not match the codes".into()));
        }
        Ok(Self { codes, ema_size, ema_sum, initialized: true })
    }

    pub fn size(&self) -> usize {
        self.codes.nrows()
    }

    pub fn dim(&self) -> usize {
        self.codes.ncols()
    }

    pub fn codes(&self) -> &Array2<F> {
        &self.codes
    }

    pub fn ema_size(&self) -> &Array1<F> {
        &self.ema_size
    }

    pub fn ema_sum(&self) -> &Array2<F> {
        &self.ema_sum
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    /// Seed the codes with (a random permutation of) encoder outputs. When
    /// there are fewer latents than codes they are tiled with small noise.
    pub fn init_from(&mut self, latents: ArrayView2<F>, rng: &mut impl Rng) {
        let (n, d) = latents.dim();
        assert_eq!(d, self.dim());
        assert!(n > 0, "cannot initialise a codebook from zero latents");
        let k = self.size();
        let std = 0.01 / (d as f64).sqrt();
        let mut order: Vec<usize> = (0..n.max(k)).collect();
        order.shuffle(rng);
        for (code, &src) in order.iter().take(k).enumerate() {
            let noisy = src >= n;
            for j in 0..d {
                let mut v = latents[(src % n, j)];
                if noisy {
                    v += cast::<F>(std * gaussian(rng));
                }
                self.codes[(code, j)] = v;
            }
        }
        self.ema_sum.assign(&self.codes);
        self.ema_size.fill(F::one());
        self.initialized = true;
    }

    /// Nearest code for every row of `latents` (squared Euclidean distance,
    /// ties to the lowest index) and the selected code vectors.
    pub fn quantize(&self, latents: ArrayView2<F>) -> (Vec<usize>, Array2<F>) {
        assert_eq!(latents.ncols(), self.dim(), "latent width");
        let mut idx = Vec::with_capacity(latents.nrows());
        let mut z = Array2::zeros(latents.raw_dim());
        for (row, mut out) in latents.rows().into_iter().zip(z.rows_mut()) {
            let mut best = 0;
            let mut best_d = F::infinity();
            for (k, code) in self.codes.rows().into_iter().enumerate() {
                let mut dist = F::zero();
                for (a, b) in row.iter().zip(code.iter()) {
                    let e = *a - *b;
                    dist += e * e;
                }
                if dist < best_d {
                    best_d = dist;
                    best = k;
                }
            }
            out.assign(&self.codes.row(best));
            idx.push(best);
        }
        (idx, z)
    }

    /// Code vectors for the given indices.
    pub fn lookup(&self, indices: &[usize]) -> Result<Array2<F>> {
        let mut z = Array2::zeros((indices.len(), self.dim()));
        for (r, &k) in indices.iter().enumerate() {
            if k >= self.size() {
                return Err(Error::validation(format!("token {k} out of range 0..{}", self.size())));
            }
            z.row_mut(r).assign(&self.codes.row(k));
        }
        Ok(z)
    }

    /// One EMA step:
    /// `size = λ·size + (1-λ)·count`, `sum = λ·sum + (1-λ)·Σ latents`,
    /// `code = sum / size`. An empty batch is a no-op.
    pub fn ema_update(&mut self, latents: ArrayView2<F>, assignments: &[usize], decay: f64) {
        assert_eq!(latents.nrows(), assignments.len());
        if assignments.is_empty() {
            return;
        }
        let k = self.size();
        let mut counts = Array1::<F>::zeros(k);
        let mut sums = Array2::<F>::zeros(self.codes.raw_dim());
        for (row, &a) in latents.rows().into_iter().zip(assignments) {
            counts[a] += F::one();
            let mut s = sums.row_mut(a);
            s += &row;
        }
        let lambda = cast::<F>(decay);
        let rest = F::one() - lambda;
        self.ema_size.zip_mut_with(&counts, |s, &c| *s = lambda * *s + rest * c);
        self.ema_sum.zip_mut_with(&sums, |s, &c| *s = lambda * *s + rest * c);
        let tiny = cast::<F>(1e-12);
        for ((mut code, sum), &size) in self.codes.rows_mut().into_iter().zip(self.ema_sum.rows()).zip(self.ema_size.iter()) {
            if size > tiny {
                code.zip_mut_with(&sum, |v, &s| *v = s / size);
            }
        }
    }

    /// Replace every code whose EMA size is below `threshold` by a random row
    /// of `latents`; its statistics restart at size 1. Returns the replaced
    /// indices.
    pub fn reset_dead(&mut self, latents: ArrayView2<F>, threshold: f64, rng: &mut impl Rng) -> Vec<usize> {
        if latents.nrows() == 0 {
            return Vec::new();
        }
        let threshold = cast::<F>(threshold);
        let dead: Vec<usize> = (0..self.size()).filter(|&k| self.ema_size[k] < threshold).collect();
        for &k in &dead {
            let src = rng.gen_range(0..latents.nrows());
            self.codes.row_mut(k).assign(&latents.row(src));
            self.ema_sum.row_mut(k).assign(&latents.row(src));
            self.ema_size[k] = F::one();
        }
        dead
    }
}

/// Standard normal draw via Box-Muller.
fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_match_and_ties() {
        let mut codes = Array2::<f64>::zeros((10, 2));
        codes.row_mut(7).assign(&array![3.0, -1.0]);
        codes.row_mut(3).assign(&array![1.0, 0.0]);
        codes.row_mut(5).assign(&array![-1.0, 0.0]);
        for k in [0, 1, 2, 4, 6, 8, 9] {
            codes.row_mut(k).assign(&array![50.0 + k as f64, 50.0]);
        }
        let cb = Codebook::from_codes(codes);
        let (idx, z) = cb.quantize(array![[3.0, -1.0], [0.0, 0.0]].view());
        assert_eq!(idx, vec![7, 3]);
        assert_eq!(z.row(0), array![3.0, -1.0]);
    }

    #[test]
    fn lambda_zero_jumps_to_batch_mean() {
        let mut cb = Codebook::from_codes(array![[0.0, 0.0], [10.0, 10.0]]);
        let h = array![[1.0, 2.0], [3.0, 4.0], [9.0, 9.0]];
        cb.ema_update(h.view(), &[0, 0, 1], 0.0);
        assert_eq!(cb.codes().row(0), array![2.0, 3.0]);
        assert_eq!(cb.codes().row(1), array![9.0, 9.0]);
    }

    #[test]
    fn single_code_converges_geometrically() {
        let v = array![[2.0, -4.0]];
        let mut cb = Codebook::from_codes(array![[0.0, 0.0]]);
        let lambda = 0.9;
        for t in 1..=30 {
            cb.ema_update(v.view(), &[0], lambda);
            let expect = 2.0 * (1.0 - lambda.powi(t));
            assert!((cb.codes()[(0, 0)] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn unused_code_keeps_its_value() {
        let mut cb = Codebook::<f64>::from_codes(array![[0.0], [5.0]]);
        cb.ema_update(array![[1.0]].view(), &[0], 0.99);
        assert_eq!(cb.codes()[(1, 0)], 5.0);
        assert!((cb.ema_size()[1] - 0.99).abs() < 1e-12);
    }

    #[test]
    fn reset_replaces_only_low_usage_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut cb = Codebook::from_codes(array![[0.0], [1.0], [2.0]]);
        for _ in 0..100 {
            cb.ema_update(array![[0.0], [2.0]].view(), &[0, 2], 0.9);
        }
        let latents = array![[7.0], [8.0]];
        let dead = cb.reset_dead(latents.view(), 1.0, &mut rng);
        assert_eq!(dead, vec![1]);
        assert!([7.0, 8.0].contains(&cb.codes()[(1, 0)]));
        assert_eq!(cb.ema_size()[1], 1.0);
        assert_eq!(cb.codes()[(0, 0)], 0.0);
    }

    #[test]
    fn init_tiles_when_batch_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut cb = Codebook::<f64>::new(8, 2);
        let h = array![[1.0, 1.0], [-1.0, 2.0], [0.5, 0.0]];
        cb.init_from(h.view(), &mut rng);
        assert!(cb.is_initialized());
        for row in cb.codes().rows() {
            let near = h.rows().into_iter().any(|r| (&r - &row).mapv(f64::abs).sum() < 0.05);
            assert!(near);
        }
        assert_eq!(cb.ema_sum(), cb.codes());
    }
}
