use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::BIOMECH_DIM;
use crate::nn::{cast, smooth_l1, Float};

/// Loss terms of one batch. `recon` includes the weighted biomechanical term;
/// `recon_plain` is the smooth-L1 over all feature columns alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqLoss<F> {
    pub recon: F,
    pub recon_plain: F,
    pub commit: F,
    pub embed: F,
    pub total: F,
}

/// Gradients of the total loss. `d_h_embed` is the embedding term's
/// gradient with respect to the encoder output, which the stop-gradient
/// makes identically zero.
#[derive(Debug, Clone)]
pub struct VqLossGrads<F> {
    pub d_recon: Array3<F>,
    pub d_h_commit: Array3<F>,
    pub d_h_embed: Array3<F>,
}

/// Column range of the biomechanical block (the last 28 columns).
pub fn biomech_columns(width: usize) -> std::ops::Range<usize> {
    width.saturating_sub(BIOMECH_DIM)..width
}

/// `total = recon + commit + embed` with
/// `recon = smoothL1(x, x_r) + α·smoothL1(x[bio], x_r[bio])`,
/// `commit = mean (H - sg[Z])²` and `embed = β·mean (sg[H] - Z)²`.
///
/// `frame_mask` is `(B, T)` and `latent_mask` is `(B, N)`; masked positions
/// contribute nothing.
#[allow(clippy::too_many_arguments)]
pub fn vq_loss<F: Float>(
    x: &Array3<F>,
    x_r: &Array3<F>,
    frame_mask: &Array2<F>,
    h: &Array3<F>,
    z: &Array3<F>,
    latent_mask: &Array2<F>,
    alpha: f64,
    beta: f64,
) -> Result<(VqLoss<F>, VqLossGrads<F>)> {
    if x.dim() != x_r.dim() {
        return Err(Error::Shape(format!("input {:?} vs reconstruction {:?}", x.dim(), x_r.dim())));
    }
    if h.dim() != z.dim() {
        return Err(Error::Shape(format!("latents {:?} vs codes {:?}", h.dim(), z.dim())));
    }
    let (b, c, t) = x.dim();
    let (_, d, n) = h.dim();
    if frame_mask.dim() != (b, t) || latent_mask.dim() != (b, n) || h.dim().0 != b {
        return Err(Error::Shape("mask shapes do not match the batch".into()));
    }

    let (plain, d_plain) = smooth_l1(x_r, x, frame_mask, 0..c);
    let (bio, d_bio) = smooth_l1(x_r, x, frame_mask, biomech_columns(c));
    let a = cast::<F>(alpha);
    let recon = plain + a * bio;
    let d_recon = d_plain + &(d_bio * a);

    let count = latent_mask.sum() * cast::<F>(d as f64);
    let mut sq = F::zero();
    let mut d_h_commit = Array3::zeros(h.raw_dim());
    if count > F::zero() {
        let two = cast::<F>(2.0);
        for ((i, j, k), hv) in h.indexed_iter() {
            let w = latent_mask[(i, k)];
            if w == F::zero() {
                continue;
            }
            let e = *hv - z[(i, j, k)];
            sq += w * e * e;
            d_h_commit[(i, j, k)] = two * w * e / count;
        }
        sq = sq / count;
    }
    let commit = sq;
    let embed = cast::<F>(beta) * sq;
    let loss = VqLoss { recon, recon_plain: plain, commit, embed, total: recon + commit + embed };
    Ok((loss, VqLossGrads { d_recon, d_h_commit, d_h_embed: Array3::zeros(h.raw_dim()) }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand3(shape: (usize, usize, usize), rng: &mut impl Rng) -> Array3<f64> {
        Array3::from_shape_simple_fn(shape, || rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn perfect_reconstruction_and_exact_codes_give_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = rand3((2, 40, 8), &mut rng);
        let h = rand3((2, 5, 2), &mut rng);
        let (l, _) = vq_loss(&x, &x, &Array2::ones((2, 8)), &h, &h, &Array2::ones((2, 2)), 0.5, 1.0).unwrap();
        assert_eq!(l.total, 0.0);
    }

    #[test]
    fn alpha_zero_is_plain_smooth_l1() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand3((2, 40, 8), &mut rng);
        let xr = rand3((2, 40, 8), &mut rng);
        let h = rand3((2, 5, 2), &mut rng);
        let mask = Array2::ones((2, 8));
        let (l, _) = vq_loss(&x, &xr, &mask, &h, &h, &Array2::ones((2, 2)), 0.0, 1.0).unwrap();
        let (plain, _) = smooth_l1(&xr, &x, &mask, 0..40);
        assert_eq!(l.recon, plain);
        assert_eq!(l.recon_plain, plain);
    }

    #[test]
    fn terms_match_their_definitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand3((1, 30, 4), &mut rng);
        let xr = rand3((1, 30, 4), &mut rng);
        let h = rand3((1, 3, 2), &mut rng);
        let z = rand3((1, 3, 2), &mut rng);
        let mask = Array2::ones((1, 4));
        let (l, _) = vq_loss(&x, &xr, &mask, &h, &z, &Array2::ones((1, 2)), 0.5, 2.0).unwrap();
        let mse = (&h - &z).mapv(|v| v * v).mean().unwrap();
        assert!((l.commit - mse).abs() < 1e-12);
        assert!((l.embed - 2.0 * mse).abs() < 1e-12);
        let (bio, _) = smooth_l1(&xr, &x, &mask, 2..30);
        assert!((l.recon - l.recon_plain - 0.5 * bio).abs() < 1e-12);
        assert!((l.total - (l.recon + l.commit + l.embed)).abs() < 1e-12);
    }

    #[test]
    fn masked_positions_are_ignored() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand3((1, 30, 8), &mut rng);
        let mut xr = x.clone();
        let h = rand3((1, 3, 2), &mut rng);
        let mut z = h.clone();
        for c in 0..30 {
            for t in 4..8 {
                xr[(0, c, t)] += 5.0;
            }
        }
        for j in 0..3 {
            z[(0, j, 1)] += 5.0;
        }
        let mut fm = Array2::ones((1, 8));
        fm.slice_mut(ndarray::s![.., 4..]).fill(0.0);
        let mut lm = Array2::ones((1, 2));
        lm[(0, 1)] = 0.0;
        let (l, g) = vq_loss(&x, &xr, &fm, &h, &z, &lm, 0.5, 1.0).unwrap();
        assert_eq!(l.total, 0.0);
        assert!(g.d_recon.iter().all(|&v| v == 0.0));
        assert!(g.d_h_commit.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let x = Array3::<f64>::zeros((1, 30, 8));
        let xr = Array3::<f64>::zeros((1, 30, 4));
        let h = Array3::<f64>::zeros((1, 3, 2));
        assert!(vq_loss(&x, &xr, &Array2::ones((1, 8)), &h, &h, &Array2::ones((1, 2)), 0.5, 1.0).is_err());
    }
}
