//! Action recognition: a residual 1D CNN from feature sequences to one of
//! the 25 action types.

mod eval;
mod model;
mod train;

use std::path::Path;

use ndarray::{Array2, Array3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actions::ActionType;
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::features::{apply_z, FeatureMatrix, FeatureStats};
use crate::nn::gradcheck::{check_gradients, TensorCheck};
use crate::nn::{cast, cross_entropy, Float, Mode, Module, Param};

pub use eval::{argmax, Evaluation};
pub use model::{BasicBlock, ClassifierNet, ClsArch, MIN_INPUT_LEN};
pub use train::{
    evaluate, split_by_participant, train_classifier, ClsTrainConfig, ClsTrainReport, EpochLog, LabeledInstance, Split,
};

pub const CLS_MAGIC: &[u8; 4] = b"UBCL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub action: ActionType,
    pub logits: Vec<f64>,
}

/// The network with the feature statistics it was trained on.
#[derive(Debug, Clone)]
pub struct ClassifierModel<F> {
    arch: ClsArch,
    net: ClassifierNet<F>,
    stats: Option<FeatureStats>,
}

impl<F: Float> ClassifierModel<F> {
    pub fn new(arch: ClsArch, seed: u64) -> Result<Self> {
        if arch.input_dim == 0 || arch.stem_channels == 0 || arch.wide_channels == 0 || arch.classes < 2 {
            return Err(Error::validation("classifier sizes must be positive with at least 2 classes"));
        }
        if !(0.0..1.0).contains(&arch.dropout) {
            return Err(Error::validation(format!("dropout {} outside [0, 1)", arch.dropout)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self { net: ClassifierNet::new(&arch, seed, &mut rng), arch, stats: None })
    }

    pub fn arch(&self) -> &ClsArch {
        &self.arch
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

    pub fn net_mut(&mut self) -> &mut ClassifierNet<F> {
        &mut self.net
    }

    /// Logits for a `(B, input_dim, T)` batch of normalized features.
    pub fn forward(&mut self, x: &Array3<F>, mode: Mode) -> Result<Array2<F>> {
        let (_, c, t) = x.dim();
        if c != self.arch.input_dim {
            return Err(Error::Shape(format!("input has {c} channels, model expects {}", self.arch.input_dim)));
        }
        if t < MIN_INPUT_LEN {
            return Err(Error::InsufficientFrames { needed: MIN_INPUT_LEN, got: t });
        }
        Ok(self.net.forward(x, mode))
    }

    /// Logits of one normalized `T × input_dim` block.
    pub fn logits_normalized(&mut self, z: &Array2<f64>) -> Result<Vec<f64>> {
        let x = z.t().mapv(cast::<F>).insert_axis(Axis(0));
        let logits = self.forward(&x, Mode::Eval)?;
        Ok(logits.row(0).iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
    }

    /// Classify raw (unnormalized) features.
    pub fn predict(&mut self, features: &FeatureMatrix) -> Result<Prediction> {
        let stats = self.stats.as_ref().ok_or_else(|| Error::validation("classifier has no feature statistics"))?;
        if features.rows() < MIN_INPUT_LEN {
            return Err(Error::InsufficientFrames { needed: MIN_INPUT_LEN, got: features.rows() });
        }
        let z = apply_z(features, stats)?;
        let logits = self.logits_normalized(z.data())?;
        let index = argmax(&logits).ok_or_else(|| Error::validation("classifier produced no finite logit"))?;
        Ok(Prediction { action: ActionType::from_class_index(index)?, logits })
    }

    pub fn save(&mut self, path: &Path, extra: serde_json::Value) -> Result<()> {
        let header = serde_json::json!({ "kind": "classifier", "arch": self.arch, "stats": self.stats, "config": extra });
        let mut ckpt = Checkpoint::new(header);
        ckpt.push_module("", self);
        ckpt.save(path, CLS_MAGIC)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt = Checkpoint::load(path, CLS_MAGIC)?;
        let arch: ClsArch = serde_json::from_value(ckpt.header["arch"].clone())?;
        let stats: Option<FeatureStats> = serde_json::from_value(ckpt.header["stats"].clone())?;
        let mut model = Self::new(arch, 0)?;
        ckpt.load_module("", &mut model)?;
        if let Some(st) = stats {
            model.set_stats(st)?;
        }
        Ok(model)
    }
}

impl<F: Float> Module<F> for ClassifierModel<F> {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        self.net.visit(prefix, f);
    }
}

/// Finite-difference check of every trainable tensor of a small classifier
/// under cross-entropy, with batch statistics and fixed dropout masks.
pub fn gradient_check(arch: ClsArch, batch: usize, len: usize, seed: u64) -> Result<Vec<TensorCheck>> {
    use rand::Rng;
    let mut model = ClassifierModel::<f64>::new(arch, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc1a5);
    let x = Array3::from_shape_simple_fn((batch, arch.input_dim, len), || rng.gen_range(-1.0..1.0));
    let labels: Vec<usize> = (0..batch).map(|i| i % arch.classes).collect();
    model.forward(&x, Mode::Train)?;
    Ok(check_gradients(
        &mut model,
        |m, backward| {
            m.net.reseed_dropout(seed);
            let logits = m.net.forward(&x, Mode::Train);
            let (loss, grad) = cross_entropy(&logits, &labels);
            if backward {
                m.net.backward(&grad);
            }
            loss
        },
        1e-5,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_arch() -> ClsArch {
        ClsArch { input_dim: 6, stem_channels: 3, wide_channels: 5, blocks_per_stage: 2, classes: 4, dropout: 0.5 }
    }

    #[test]
    fn default_arch_shapes() {
        let mut m = ClassifierModel::<f32>::new(ClsArch::default(), 0).unwrap();
        for t in [8, 9, 60, 301] {
            let x = Array3::zeros((2, 315, t));
            assert_eq!(m.forward(&x, Mode::Eval).unwrap().dim(), (2, 25));
        }
        assert!(m.forward(&Array3::zeros((1, 315, 7)), Mode::Eval).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let checks = gradient_check(toy_arch(), 4, 16, 7).unwrap();
        assert!(checks.iter().any(|c| c.name.contains("shortcut")));
        for c in &checks {
            assert!(c.rel_error < 1e-4, "{} rel error {}", c.name, c.rel_error);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ubcl");
        let arch = ClsArch { input_dim: 315, ..toy_arch() };
        let mut m = ClassifierModel::<f32>::new(ClsArch { classes: 25, ..arch }, 3).unwrap();
        m.set_stats(FeatureStats { mean: vec![0.1; 315], std: vec![1.5; 315] }).unwrap();
        m.forward(&Array3::from_elem((2, 315, 16), 0.3), Mode::Train).unwrap();
        m.save(&path, serde_json::json!({})).unwrap();
        let mut back = ClassifierModel::<f32>::load(&path).unwrap();
        let f = FeatureMatrix::new(Array2::from_shape_fn((20, 315), |(i, j)| ((i + 2 * j) % 7) as f64), 60.0).unwrap();
        assert_eq!(back.predict(&f).unwrap(), m.predict(&f).unwrap());
        assert!(crate::vq::VqModel::<f32>::load(&path).is_err());
    }
}
