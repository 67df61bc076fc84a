use std::collections::BTreeSet;

use ndarray::{s, Array2, Array3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, ClassifierModel, ClsArch, Evaluation, MIN_INPUT_LEN};
use crate::actions::ActionType;
use crate::error::{Error, Result};
use crate::features::{apply_z, fit_stats, FeatureMatrix};
use crate::nn::{cross_entropy, AdamW, AdamWConfig, Mode, Module};

/// One action instance with its label and performer.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub id: String,
    pub participant: u32,
    pub action: ActionType,
    pub features: FeatureMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClsTrainConfig {
    pub batch: usize,
    pub lr: f64,
    pub steps: usize,
    /// Longest training crop in frames; evaluation always uses full length.
    pub crop: usize,
    pub weight_decay: f64,
    /// Train / validation / test fractions of participants.
    pub split: [f64; 3],
    pub seed: u64,
}

impl Default for ClsTrainConfig {
    fn default() -> Self {
        Self {
            batch: 16,
            lr: 1e-3,
            steps: 800,
            crop: 160,
            weight_decay: AdamWConfig::default().weight_decay,
            split: [0.85, 0.05, 0.10],
            seed: 0,
        }
    }
}

impl ClsTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.steps == 0 || self.lr <= 0.0 || self.crop < MIN_INPUT_LEN {
            return Err(Error::validation(format!(
                "classifier training needs positive batch, steps and lr and a crop of at least {MIN_INPUT_LEN}"
            )));
        }
        if self.split.iter().any(|&r| r < 0.0) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::validation("split fractions must be non-negative and sum to 1"));
        }
        Ok(())
    }
}

/// Participant-disjoint partition of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_participants: Vec<u32>,
    pub val_participants: Vec<u32>,
    pub test_participants: Vec<u32>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Check that no participant and no instance appears in two parts.
    pub fn verify_disjoint(&self) -> Result<()> {
        let groups = [&self.train_participants, &self.val_participants, &self.test_participants];
        let mut seen = BTreeSet::new();
        for g in groups {
            for p in g {
                if !seen.insert(*p) {
                    return Err(Error::validation(format!("participant {p} appears in more than one split")));
                }
            }
        }
        let mut items = BTreeSet::new();
        for i in self.train.iter().chain(&self.val).chain(&self.test) {
            if !items.insert(*i) {
                return Err(Error::validation(format!("instance {i} appears in more than one split")));
            }
        }
        Ok(())
    }
}

/// Shuffle the distinct participants and cut them by `fractions`
/// (rounded; validation and test get at least one participant each when
/// their fraction is positive and there are three or more participants).
pub fn split_by_participant(participants: &[u32], fractions: [f64; 3], seed: u64) -> Result<Split> {
    let mut ids: Vec<u32> = participants.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let n = ids.len();
    if n == 0 {
        return Err(Error::validation("no participants to split"));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let count = |f: f64| {
        let c = (f * n as f64).round() as usize;
        if f > 0.0 && n >= 3 {
            c.max(1)
        } else {
            c
        }
    };
    let (n_val, n_test) = (count(fractions[1]), count(fractions[2]));
    if n_val + n_test >= n {
        return Err(Error::validation(format!("{n} participants leave none for training")));
    }
    let test_participants: Vec<u32> = ids[..n_test].to_vec();
    let val_participants: Vec<u32> = ids[n_test..n_test + n_val].to_vec();
    let train_participants: Vec<u32> = ids[n_test + n_val..].to_vec();
    let members = |group: &[u32]| -> Vec<usize> {
        participants.iter().enumerate().filter(|(_, p)| group.contains(p)).map(|(i, _)| i).collect()
    };
    let sorted = |mut v: Vec<u32>| {
        v.sort_unstable();
        v
    };
    let split = Split {
        train: members(&train_participants),
        val: members(&val_participants),
        test: members(&test_participants),
        train_participants: sorted(train_participants),
        val_participants: sorted(val_participants),
        test_participants: sorted(test_participants),
    };
    split.verify_disjoint()?;
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub step: usize,
    pub train_loss: f64,
    pub val_macro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClsTrainReport {
    pub split: Split,
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were kept (best validation macro F1).
    pub best_epoch: usize,
    /// Classes without training instances; excluded from macro averages.
    pub masked_classes: Vec<usize>,
    pub test: Option<Evaluation>,
}

impl ClsTrainReport {
    pub const CSV_HEADER: &'static str = "epoch,step,train_loss,val_macro_f1";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for e in &self.epochs {
            let val = e.val_macro_f1.map_or(String::new(), |v| v.to_string());
            out.push_str(&format!("{},{},{},{}\n", e.epoch, e.step, e.train_loss, val));
        }
        out
    }
}

/// Evaluate `model` on full-length instances.
pub fn evaluate(model: &mut ClassifierModel<f32>, instances: &[&LabeledInstance], masked: &[bool]) -> Result<Evaluation> {
    let mut truth = Vec::with_capacity(instances.len());
    let mut predicted = Vec::with_capacity(instances.len());
    for inst in instances {
        truth.push(inst.action.class_index());
        predicted.push(model.predict(&inst.features)?.action.class_index());
    }
    Evaluation::from_predictions(&truth, &predicted, model.arch().classes, masked)
}

fn evaluate_normalized(model: &mut ClassifierModel<f32>, data: &[Array2<f64>], labels: &[usize], masked: &[bool]) -> Result<Evaluation> {
    let mut predicted = Vec::with_capacity(data.len());
    for z in data {
        let logits = model.logits_normalized(z)?;
        predicted.push(argmax(&logits).ok_or_else(|| Error::validation("classifier produced no finite logit"))?);
    }
    Evaluation::from_predictions(labels, &predicted, model.arch().classes, masked)
}

/// Train on the participant-disjoint training split, keep the parameters
/// with the best validation macro F1 and report test metrics.
pub fn train_classifier(
    dataset: &[LabeledInstance],
    arch: ClsArch,
    cfg: &ClsTrainConfig,
) -> Result<(ClassifierModel<f32>, ClsTrainReport)> {
    cfg.validate()?;
    let classes: BTreeSet<usize> = dataset.iter().map(|d| d.action.class_index()).collect();
    if classes.len() < 2 {
        return Err(Error::validation("training needs at least two classes"));
    }
    if let Some(short) = dataset.iter().find(|d| d.features.rows() < MIN_INPUT_LEN) {
        return Err(Error::InsufficientFrames { needed: MIN_INPUT_LEN, got: short.features.rows() });
    }
    let participants: Vec<u32> = dataset.iter().map(|d| d.participant).collect();
    let split = split_by_participant(&participants, cfg.split, cfg.seed)?;

    let train_feats: Vec<FeatureMatrix> = split.train.iter().map(|&i| dataset[i].features.clone()).collect();
    let stats = fit_stats(&train_feats)?;
    let normalize = |idx: &[usize]| -> Result<(Vec<Array2<f64>>, Vec<usize>)> {
        let mut data = Vec::with_capacity(idx.len());
        for &i in idx {
            data.push(apply_z(&dataset[i].features, &stats)?.into_data());
        }
        Ok((data, idx.iter().map(|&i| dataset[i].action.class_index()).collect()))
    };
    let (train_data, train_labels) = normalize(&split.train)?;
    let (val_data, val_labels) = normalize(&split.val)?;
    let train_f32: Vec<Array2<f32>> = train_data.iter().map(|z| z.mapv(|v| v as f32)).collect();

    let present: BTreeSet<usize> = train_labels.iter().copied().collect();
    let masked: Vec<bool> = (0..arch.classes).map(|c| !present.contains(&c)).collect();
    let masked_classes: Vec<usize> = (0..arch.classes).filter(|&c| masked[c]).collect();
    if !masked_classes.is_empty() {
        log::warn!("classes without training instances (masked in metrics): {masked_classes:?}");
    }

    let mut model = ClassifierModel::<f32>::new(arch, cfg.seed)?;
    model.set_stats(stats)?;
    let mut opt = AdamW::new(AdamWConfig { lr: cfg.lr, weight_decay: cfg.weight_decay, ..AdamWConfig::default() });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train_f32.len()).collect();
    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, ClassifierModel<f32>)> = None;
    let mut step = 0;
    let mut epoch = 0;

    while step < cfg.steps {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch) {
            if step >= cfg.steps {
                break;
            }
            let len = chunk.iter().map(|&i| train_f32[i].nrows()).min().expect("non-empty chunk").min(cfg.crop);
            let mut x = Array3::<f32>::zeros((chunk.len(), arch.input_dim, len));
            for (b, &i) in chunk.iter().enumerate() {
                let start = rng.gen_range(0..=train_f32[i].nrows() - len);
                x.slice_mut(s![b, .., ..]).assign(&train_f32[i].slice(s![start..start + len, ..]).t());
            }
            let labels: Vec<usize> = chunk.iter().map(|&i| train_labels[i]).collect();
            model.zero_grad();
            let logits = model.forward(&x, Mode::Train)?;
            let (loss, grad) = cross_entropy(&logits, &labels);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            model.net_mut().backward(&grad);
            opt.step(&mut model, cfg.lr);
            loss_sum += f64::from(loss);
            batches += 1;
            step += 1;
        }
        let val_macro_f1 = if val_data.is_empty() {
            None
        } else {
            Some(evaluate_normalized(&mut model, &val_data, &val_labels, &masked)?.macro_f1)
        };
        let train_loss = loss_sum / batches.max(1) as f64;
        log::info!("classifier epoch {epoch} step {step}: loss {train_loss:.4} val macro F1 {val_macro_f1:?}");
        let score = val_macro_f1.unwrap_or(0.0);
        if best.as_ref().is_none_or(|(b, _, _)| score >= *b) {
            best = Some((score, epoch, model.clone()));
        }
        epochs.push(EpochLog { epoch, step, train_loss, val_macro_f1 });
        epoch += 1;
    }

    let (_, best_epoch, mut model) = best.expect("at least one epoch");
    let test = if split.test.is_empty() {
        None
    } else {
        let tests: Vec<&LabeledInstance> = split.test.iter().map(|&i| &dataset[i]).collect();
        Some(evaluate(&mut model, &tests, &masked)?)
    };
    Ok((model, ClsTrainReport { split, epochs, best_epoch, masked_classes, test }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn forty_participants_split_34_2_4() {
        let participants: Vec<u32> = (0..40).flat_map(|p| [p; 25]).collect();
        let s = split_by_participant(&participants, [0.85, 0.05, 0.10], 0).unwrap();
        assert_eq!((s.train_participants.len(), s.val_participants.len(), s.test_participants.len()), (34, 2, 4));
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (850, 50, 100));
        s.verify_disjoint().unwrap();
    }

    #[test]
    fn overlap_is_detected() {
        let s = Split {
            train_participants: vec![1, 2],
            val_participants: vec![2],
            test_participants: vec![3],
            train: vec![0],
            val: vec![1],
            test: vec![2],
        };
        assert!(s.verify_disjoint().is_err());
    }

    #[test]
    fn single_class_is_rejected() {
        let f = FeatureMatrix::new(Array2::zeros((20, crate::features::FEATURE_DIM)), 60.0).unwrap();
        let data: Vec<LabeledInstance> = (0..6)
            .map(|p| LabeledInstance { id: format!("{p}"), participant: p, action: ActionType::new(1).unwrap(), features: f.clone() })
            .collect();
        assert!(train_classifier(&data, ClsArch::default(), &ClsTrainConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn splits_partition_participants(n in 3u32..60, seed in 0u64..1000, reps in 1usize..4) {
            let participants: Vec<u32> = (0..n).flat_map(|p| std::iter::repeat_n(p, reps)).collect();
            let s = split_by_participant(&participants, [0.85, 0.05, 0.10], seed).unwrap();
            prop_assert!(s.verify_disjoint().is_ok());
            prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), participants.len());
            for &i in &s.test {
                prop_assert!(s.test_participants.contains(&participants[i]));
            }
            prop_assert!(!s.train.is_empty());
        }
    }
}
