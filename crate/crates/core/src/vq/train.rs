use ndarray::{s, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{VqArch, VqModel, DOWNSAMPLE};
use crate::error::{Error, Result};
use crate::features::{apply_z, fit_stats, FeatureMatrix};
use crate::nn::{AdamW, AdamWConfig, Module};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqTrainConfig {
    pub batch: usize,
    pub steps: usize,
    pub lr: f64,
    /// Step after which the learning rate is multiplied by `lr_decay`.
    pub lr_decay_step: usize,
    pub lr_decay: f64,
    pub beta: f64,
    pub alpha: f64,
    pub ema_decay: f64,
    pub window: usize,
    pub reset_every: usize,
    pub reset_threshold: f64,
    pub weight_decay: f64,
    /// Steps over which codebook utilization is counted.
    pub utilization_window: usize,
    pub seed: u64,
}

impl VqTrainConfig {
    /// Full-scale schedule: batch 128, 150K steps, decay after 100K.
    pub fn paper() -> Self {
        Self {
            batch: 128,
            steps: 150_000,
            lr: 2e-4,
            lr_decay_step: 100_000,
            lr_decay: 0.1,
            beta: 1.0,
            alpha: 0.5,
            ema_decay: 0.99,
            window: 64,
            reset_every: 1000,
            reset_threshold: 1.0,
            weight_decay: AdamWConfig::default().weight_decay,
            utilization_window: 500,
            seed: 0,
        }
    }

    /// Single-core schedule: batch 16, 5 000 steps.
    pub fn desk() -> Self {
        Self { batch: 16, steps: 5000, ..Self::paper() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.batch > 0
            && self.steps > 0
            && self.lr > 0.0
            && self.lr_decay > 0.0
            && self.beta >= 0.0
            && self.alpha >= 0.0
            && (0.0..1.0).contains(&self.ema_decay)
            && self.reset_every > 0
            && self.utilization_window > 0;
        if !positive {
            return Err(Error::validation("VQ training settings must be positive (ema decay in [0, 1))"));
        }
        if self.window == 0 || self.window % DOWNSAMPLE != 0 {
            return Err(Error::validation(format!("window {} must be a positive multiple of {DOWNSAMPLE}", self.window)));
        }
        Ok(())
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        if step >= self.lr_decay_step {
            self.lr * self.lr_decay
        } else {
            self.lr
        }
    }
}

impl Default for VqTrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqLogEntry {
    pub step: usize,
    pub lr: f64,
    pub recon: f64,
    pub recon_plain: f64,
    pub commit: f64,
    pub embed: f64,
    pub total: f64,
    /// Fraction of codes assigned at least once in the utilization window.
    pub utilization: f64,
    pub resets: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VqTrainLog {
    pub entries: Vec<VqLogEntry>,
}

impl VqTrainLog {
    pub const CSV_HEADER: &'static str = "step,lr,recon,recon_plain,commit,embed,total,utilization,resets";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                e.step, e.lr, e.recon, e.recon_plain, e.commit, e.embed, e.total, e.utilization, e.resets
            ));
        }
        out
    }

    /// Plain smooth-L1 at the first step.
    pub fn initial_recon(&self) -> Option<f64> {
        self.entries.first().map(|e| e.recon_plain)
    }

    /// Mean plain smooth-L1 over the last `n` steps.
    pub fn final_recon(&self, n: usize) -> Option<f64> {
        let tail = &self.entries[self.entries.len().saturating_sub(n.max(1))..];
        (!tail.is_empty()).then(|| tail.iter().map(|e| e.recon_plain).sum::<f64>() / tail.len() as f64)
    }

    pub fn final_utilization(&self) -> Option<f64> {
        self.entries.last().map(|e| e.utilization)
    }

    /// 95th percentile (nearest rank) of the plain smooth-L1 over the last
    /// `n` steps.
    pub fn recon_percentile_95(&self, n: usize) -> Option<f64> {
        let mut tail: Vec<f64> = self.entries[self.entries.len().saturating_sub(n.max(1))..].iter().map(|e| e.recon_plain).collect();
        if tail.is_empty() {
            return None;
        }
        tail.sort_by(f64::total_cmp);
        let rank = ((0.95 * tail.len() as f64).ceil() as usize).clamp(1, tail.len());
        Some(tail[rank - 1])
    }
}

/// `(sequence, start, valid length)` for every non-overlapping window.
fn windows(lengths: &[usize], window: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (i, &t) in lengths.iter().enumerate() {
        let mut start = 0;
        while start < t {
            out.push((i, start, window.min(t - start)));
            start += window;
        }
    }
    out
}

/// Train a tokenizer on raw feature matrices. Statistics are fitted on the
/// whole dataset and stored in the model. Single-threaded and deterministic
/// for a given seed.
pub fn train_vqvae(dataset: &[FeatureMatrix], arch: VqArch, cfg: &VqTrainConfig) -> Result<(VqModel<f32>, VqTrainLog)> {
    cfg.validate()?;
    let stats = fit_stats(dataset)?;
    let mut model = VqModel::<f32>::new(arch, cfg.window, cfg.seed)?;
    model.set_stats(stats.clone())?;
    let data: Vec<Array2<f32>> = dataset
        .iter()
        .map(|m| apply_z(m, &stats).map(|z| z.data().mapv(|v| v as f32)))
        .collect::<Result<_>>()?;
    let lengths: Vec<usize> = data.iter().map(|d| d.nrows()).collect();
    let wins = windows(&lengths, cfg.window);
    if wins.is_empty() {
        return Err(Error::validation("dataset has no frames"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut reset_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let mut opt = AdamW::new(AdamWConfig { lr: cfg.lr, weight_decay: cfg.weight_decay, ..AdamWConfig::default() });
    let k = arch.codebook_size;
    let mut last_used: Vec<Option<usize>> = vec![None; k];
    let mut log = VqTrainLog::default();
    let (c, w) = (arch.input_dim, cfg.window);

    for step in 0..cfg.steps {
        let mut x = Array3::<f32>::zeros((cfg.batch, c, w));
        let mut mask = Array2::<f32>::zeros((cfg.batch, w));
        for b in 0..cfg.batch {
            let (seq, start, len) = wins[rng.gen_range(0..wins.len())];
            x.slice_mut(s![b, .., ..len]).assign(&data[seq].slice(s![start..start + len, ..]).t());
            mask.slice_mut(s![b, ..len]).fill(1.0);
        }

        model.zero_grad();
        let out = model.forward_backward(&x, &mask, cfg.alpha, cfg.beta, None, true)?;
        if !out.loss.total.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        let lr = cfg.lr_at(step);
        opt.step(&mut model, lr);
        model.codebook_mut().ema_update(out.latents.view(), &out.assignments, cfg.ema_decay);
        for &a in &out.assignments {
            last_used[a] = Some(step);
        }
        let resets = if (step + 1) % cfg.reset_every == 0 {
            model.codebook_mut().reset_dead(out.latents.view(), cfg.reset_threshold, &mut reset_rng).len()
        } else {
            0
        };
        let used = last_used.iter().filter(|u| u.is_some_and(|s| step - s < cfg.utilization_window)).count();
        let entry = VqLogEntry {
            step,
            lr,
            recon: f64::from(out.loss.recon),
            recon_plain: f64::from(out.loss.recon_plain),
            commit: f64::from(out.loss.commit),
            embed: f64::from(out.loss.embed),
            total: f64::from(out.loss.total),
            utilization: used as f64 / k as f64,
            resets,
        };
        if step % 100 == 0 || step + 1 == cfg.steps {
            log::info!(
                "vq step {step}: recon {:.4} commit {:.4} utilization {:.3}",
                entry.recon_plain,
                entry.commit,
                entry.utilization
            );
        }
        log.entries.push(entry);
    }
    Ok((model, log))
}
