//! Motion tokenizer: a convolutional VQ-VAE over normalized feature
//! sequences with an EMA-maintained codebook.

mod codebook;
mod loss;
mod model;
mod train;

use std::path::Path;

use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::features::{apply_z, FeatureExtractor, FeatureStats};
use crate::motion::{preprocess, MotionSequence};
use crate::nn::gradcheck::{check_gradients, TensorCheck};
use crate::nn::{cast, Float, Mode, Module, Param};
use crate::skeleton::CanonicalSkeleton;

pub use codebook::Codebook;
pub use loss::{biomech_columns, vq_loss, VqLoss, VqLossGrads};
pub use model::{Decoder, DilationSchedule, Encoder, ResConvBlock, Resnet1d, VqArch, DOWNSAMPLE, STAGES};
pub use train::{train_vqvae, VqLogEntry, VqTrainConfig, VqTrainLog};

pub const VQ_MAGIC: &[u8; 4] = b"UBVQ";

/// Token indices of one action instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub id: String,
    pub tokens: Vec<usize>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Codes held fixed for a finite-difference check: the decoder sees
/// `H + offset` and the commitment term compares `H` against `codes`.
#[derive(Debug, Clone)]
pub struct FixedCodes<F> {
    pub codes: Array3<F>,
    pub offset: Array3<F>,
}

/// What one forward (and optional backward) pass produced.
#[derive(Debug, Clone)]
pub struct StepOutput<F> {
    pub loss: VqLoss<F>,
    /// `(B, code_dim, N)` encoder output.
    pub h: Array3<F>,
    /// `(B, code_dim, N)` selected codes.
    pub z: Array3<F>,
    /// Valid latent rows (padding excluded) and their assignments.
    pub latents: Array2<F>,
    pub assignments: Vec<usize>,
}

/// Encoder, decoder, codebook and the normalization the model was trained on.
#[derive(Debug, Clone)]
pub struct VqModel<F> {
    arch: VqArch,
    window: usize,
    encoder: Encoder<F>,
    decoder: Decoder<F>,
    codebook: Codebook<F>,
    stats: Option<FeatureStats>,
}

impl<F: Float> VqModel<F> {
    pub fn new(arch: VqArch, window: usize, seed: u64) -> Result<Self> {
        if window == 0 || window % DOWNSAMPLE != 0 {
            return Err(Error::validation(format!("window {window} must be a positive multiple of {DOWNSAMPLE}")));
        }
        if arch.input_dim == 0 || arch.width == 0 || arch.code_dim == 0 || arch.codebook_size == 0 {
            return Err(Error::validation("architecture sizes must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            encoder: Encoder::new(&arch, &mut rng),
            decoder: Decoder::new(&arch, &mut rng),
            codebook: Codebook::new(arch.codebook_size, arch.code_dim),
            arch,
            window,
            stats: None,
        })
    }

    pub fn arch(&self) -> &VqArch {
        &self.arch
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn codebook(&self) -> &Codebook<F> {
        &self.codebook
    }

    pub fn codebook_mut(&mut self) -> &mut Codebook<F> {
        &mut self.codebook
    }

    pub fn stats(&self) -> Option<&FeatureStats> {
        self.stats.as_ref()
    }

    pub fn set_stats(&mut self, stats: FeatureStats) -> Result<()> {
        if stats.dim() != self.arch.input_dim {
            return Err(Error::Shape(format!("stats width {} vs model input {}", stats.dim(), self.arch.input_dim)));
        }
        self.stats = Some(stats);
        Ok(())
    }

    /// `(B, input_dim, T)` to `(B, code_dim, T / 4)`.
    pub fn encode_batch(&mut self, x: &Array3<F>, mode: Mode) -> Result<Array3<F>> {
        let (_, c, t) = x.dim();
        if c != self.arch.input_dim {
            return Err(Error::Shape(format!("input has {c} channels, model expects {}", self.arch.input_dim)));
        }
        if t == 0 || t % DOWNSAMPLE != 0 {
            return Err(Error::validation(format!("length {t} is not a positive multiple of {DOWNSAMPLE}; pad upstream")));
        }
        Ok(self.encoder.forward(x, mode))
    }

    /// A `T × input_dim` block to `T/4 × code_dim` latents.
    pub fn encode(&mut self, x: ArrayView2<F>) -> Result<Array2<F>> {
        let batch = x.t().insert_axis(Axis(0)).to_owned();
        let h = self.encode_batch(&batch, Mode::Eval)?;
        Ok(h.index_axis(Axis(0), 0).t().to_owned())
    }

    /// Nearest code per latent row.
    pub fn quantize(&self, latents: ArrayView2<F>) -> (Vec<usize>, Array2<F>) {
        self.codebook.quantize(latents)
    }

    /// Tokens to a `4N × input_dim` block of normalized features.
    pub fn decode(&mut self, tokens: &[usize]) -> Result<Array2<F>> {
        if tokens.is_empty() {
            return Err(Error::validation("cannot decode an empty token sequence"));
        }
        let z = self.codebook.lookup(tokens)?;
        let batch = z.t().insert_axis(Axis(0)).to_owned();
        let y = self.decoder.forward(&batch, Mode::Eval);
        Ok(y.index_axis(Axis(0), 0).t().to_owned())
    }

    /// Tokens of a normalized `T × input_dim` feature block: windows of the
    /// model's length, the last one zero-padded to a multiple of 4.
    /// Yields `ceil(T / 4)` tokens.
    pub fn tokenize_normalized(&mut self, z: ArrayView2<f64>) -> Result<Vec<usize>> {
        let t = z.nrows();
        if t < DOWNSAMPLE {
            return Err(Error::InsufficientFrames { needed: DOWNSAMPLE, got: t });
        }
        if z.ncols() != self.arch.input_dim {
            return Err(Error::Shape(format!("features have {} columns, model expects {}", z.ncols(), self.arch.input_dim)));
        }
        let mut tokens = Vec::with_capacity(t.div_ceil(DOWNSAMPLE));
        let mut start = 0;
        while start < t {
            let len = self.window.min(t - start);
            let padded = len.div_ceil(DOWNSAMPLE) * DOWNSAMPLE;
            let mut block = Array2::<F>::zeros((padded, z.ncols()));
            block.slice_mut(s![..len, ..]).assign(&z.slice(s![start..start + len, ..]).mapv(cast::<F>));
            let h = self.encode(block.view())?;
            tokens.extend(self.quantize(h.view()).0);
            start += len;
        }
        Ok(tokens)
    }

    /// Full pipeline from raw motion: preprocess, extract, normalize with the
    /// stored statistics, encode and quantize.
    pub fn tokenize(&mut self, seq: &MotionSequence, canon: &CanonicalSkeleton) -> Result<Vec<usize>> {
        if seq.len() < DOWNSAMPLE {
            return Err(Error::InsufficientFrames { needed: DOWNSAMPLE, got: seq.len() });
        }
        let stats = self.stats.as_ref().ok_or_else(|| Error::validation("model has no feature statistics"))?;
        let features = FeatureExtractor::default().extract(&preprocess(seq, canon)?)?;
        let z = apply_z(&features, stats)?;
        self.tokenize_normalized(z.view())
    }

    /// Tokenize then decode, truncated to the input length.
    pub fn reconstruct(&mut self, z: ArrayView2<f64>) -> Result<Array2<F>> {
        let tokens = self.tokenize_normalized(z)?;
        let mut out = Array2::zeros((0, self.arch.input_dim));
        let per_window = self.window / DOWNSAMPLE;
        for chunk in tokens.chunks(per_window) {
            out.append(Axis(0), self.decode(chunk)?.view()).expect("matching widths");
        }
        Ok(out.slice(s![..z.nrows(), ..]).to_owned())
    }

    /// Forward pass on a `(B, input_dim, T)` batch with `(B, T)` frame mask.
    /// With `backward`, parameter gradients are accumulated using the
    /// straight-through estimator (decoder-input gradient copied onto the
    /// encoder output). `fixed` replaces the nearest-code search.
    #[allow(clippy::too_many_arguments)]
    pub fn forward_backward(
        &mut self,
        x: &Array3<F>,
        frame_mask: &Array2<F>,
        alpha: f64,
        beta: f64,
        fixed: Option<&FixedCodes<F>>,
        backward: bool,
    ) -> Result<StepOutput<F>> {
        let h = self.encode_batch(x, Mode::Train)?;
        let (b, d, n) = h.dim();
        let latent_mask = Array2::from_shape_fn((b, n), |(i, k)| frame_mask[(i, k * DOWNSAMPLE)]);
        let rows = h.view().permuted_axes([0, 2, 1]).as_standard_layout().into_owned().into_shape_with_order((b * n, d)).expect("contiguous");
        let valid: Vec<usize> = (0..b * n).filter(|&r| latent_mask[(r / n, r % n)] > F::zero()).collect();
        let latents = rows.select(Axis(0), &valid);
        if !self.codebook.is_initialized() {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            self.codebook.init_from(latents.view(), &mut rng);
        }

        let (z, dec_in, assignments) = match fixed {
            Some(f) => (f.codes.clone(), &h + &f.offset, Vec::new()),
            None => {
                let (idx, zrows) = self.codebook.quantize(rows.view());
                let z = zrows.into_shape_with_order((b, n, d)).expect("shape").permuted_axes([0, 2, 1]).as_standard_layout().into_owned();
                let assignments = valid.iter().map(|&r| idx[r]).collect();
                (z.clone(), z, assignments)
            }
        };
        let x_r = self.decoder.forward(&dec_in, Mode::Train);
        let (loss, grads) = vq_loss(x, &x_r, frame_mask, &h, &z, &latent_mask, alpha, beta)?;
        if backward {
            let d_dec_in = self.decoder.backward(&grads.d_recon);
            let d_h = d_dec_in + &grads.d_h_commit + &grads.d_h_embed;
            self.encoder.backward(&d_h);
        }
        Ok(StepOutput { loss, h, z, latents, assignments })
    }

    /// Save as a single file with the architecture, window and statistics in
    /// the header; `extra` is echoed under `"config"`.
    pub fn save(&mut self, path: &Path, extra: serde_json::Value) -> Result<()> {
        let header = serde_json::json!({
            "kind": "vq",
            "arch": self.arch,
            "window": self.window,
            "stats": self.stats,
            "config": extra,
        });
        let mut ckpt = Checkpoint::new(header);
        ckpt.push_module("", self);
        let cb = &self.codebook;
        ckpt.push("codebook.codes", cb.codes().mapv(|v| v.to_f32().unwrap_or(f32::NAN)).into_dyn());
        ckpt.push("codebook.ema_size", cb.ema_size().mapv(|v| v.to_f32().unwrap_or(f32::NAN)).into_dyn());
        ckpt.push("codebook.ema_sum", cb.ema_sum().mapv(|v| v.to_f32().unwrap_or(f32::NAN)).into_dyn());
        ckpt.save(path, VQ_MAGIC)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt = Checkpoint::load(path, VQ_MAGIC)?;
        let arch: VqArch = serde_json::from_value(ckpt.header["arch"].clone())?;
        let window: usize = serde_json::from_value(ckpt.header["window"].clone())?;
        let stats: Option<FeatureStats> = serde_json::from_value(ckpt.header["stats"].clone())?;
        let mut model = Self::new(arch, window, 0)?;
        ckpt.load_module("", &mut model)?;
        let to_f = |name: &str| -> Result<ndarray::ArrayD<F>> { Ok(ckpt.get(name)?.mapv(|v| cast::<F>(f64::from(v)))) };
        let dim2 = |a: ndarray::ArrayD<F>| a.into_dimensionality::<ndarray::Ix2>().map_err(|e| Error::Shape(e.to_string()));
        let codes = dim2(to_f("codebook.codes")?)?;
        let sums = dim2(to_f("codebook.ema_sum")?)?;
        let sizes = to_f("codebook.ema_size")?.into_dimensionality::<ndarray::Ix1>().map_err(|e| Error::Shape(e.to_string()))?;
        if codes.dim() != (arch.codebook_size, arch.code_dim) {
            return Err(Error::Shape(format!("codebook shape {:?} does not match the header", codes.dim())));
        }
        model.codebook = Codebook::from_parts(codes, sizes, sums)?;
        if let Some(st) = stats {
            model.set_stats(st)?;
        }
        Ok(model)
    }
}

impl<F: Float> Module<F> for VqModel<F> {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        self.encoder.visit(&crate::nn::join(prefix, "encoder"), f);
        self.decoder.visit(&crate::nn::join(prefix, "decoder"), f);
    }
}

/// Finite-difference check of every trainable tensor of a small model.
/// Codes are frozen at their values for the unperturbed parameters and the
/// decoder input is `H + (Z₀ − H₀)`, which is the straight-through surrogate
/// whose exact gradient the backward pass computes.
pub fn gradient_check(arch: VqArch, batch: usize, len: usize, seed: u64) -> Result<Vec<TensorCheck>> {
    use rand::Rng;
    let mut model = VqModel::<f64>::new(arch, len, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let x = Array3::from_shape_simple_fn((batch, arch.input_dim, len), || rng.gen_range(-1.0..1.0));
    let mut mask = Array2::ones((batch, len));
    if batch > 1 && len > DOWNSAMPLE {
        mask.slice_mut(s![batch - 1, len - DOWNSAMPLE..]).fill(0.0);
    }
    let out = model.forward_backward(&x, &mask, 0.5, 1.0, None, false)?;
    let fixed = FixedCodes { offset: &out.z - &out.h, codes: out.z };
    Ok(check_gradients(
        &mut model,
        |m, backward| m.forward_backward(&x, &mask, 0.5, 1.0, Some(&fixed), backward).expect("shapes").loss.total,
        1e-5,
    ))
}
