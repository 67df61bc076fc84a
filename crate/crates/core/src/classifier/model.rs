use ndarray::{Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{join, AvgPool, BatchNorm1d, Conv1d, Dropout, Float, Linear, MaxPool1d, Mode, Module, Param, Relu};

/// Architecture hyper-parameters of the recognition network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClsArch {
    pub input_dim: usize,
    pub stem_channels: usize,
    /// Channels of the second stage; the first stage keeps `stem_channels`.
    pub wide_channels: usize,
    pub blocks_per_stage: usize,
    pub classes: usize,
    pub dropout: f64,
}

impl Default for ClsArch {
    fn default() -> Self {
        Self {
            input_dim: crate::features::FEATURE_DIM,
            stem_channels: 64,
            wide_channels: 128,
            blocks_per_stage: 2,
            classes: crate::actions::ACTION_COUNT,
            dropout: 0.5,
        }
    }
}

/// Shortest input that survives the stem, the pool and the strided stage.
pub const MIN_INPUT_LEN: usize = 8;

/// `relu(dropout(bn(conv(relu(bn(conv(x)))))) + shortcut(x))`.
#[derive(Debug, Clone)]
pub struct BasicBlock<F> {
    conv1: Conv1d<F>,
    bn1: BatchNorm1d<F>,
    relu1: Relu<F>,
    conv2: Conv1d<F>,
    bn2: BatchNorm1d<F>,
    dropout: Dropout<F>,
    shortcut: Option<(Conv1d<F>, BatchNorm1d<F>)>,
    relu_out: Relu<F>,
}

impl<F: Float> BasicBlock<F> {
    pub fn new(inputs: usize, outputs: usize, stride: usize, dropout: f64, seed: u64, rng: &mut impl Rng) -> Self {
        let shortcut = (stride != 1 || inputs != outputs)
            .then(|| (Conv1d::new(inputs, outputs, 1, rng).stride(stride), BatchNorm1d::new(outputs)));
        Self {
            conv1: Conv1d::new(inputs, outputs, 3, rng).stride(stride).padding(1),
            bn1: BatchNorm1d::new(outputs),
            relu1: Relu::new(),
            conv2: Conv1d::new(outputs, outputs, 3, rng).padding(1),
            bn2: BatchNorm1d::new(outputs),
            dropout: Dropout::new(dropout, seed),
            shortcut,
            relu_out: Relu::new(),
        }
    }

    pub fn forward(&mut self, x: &Array3<F>, mode: Mode) -> Array3<F> {
        let h = self.conv1.forward(x, mode);
        let h = self.bn1.forward(&h, mode);
        let h = self.relu1.forward(&h, mode);
        let h = self.conv2.forward(&h, mode);
        let h = self.bn2.forward(&h, mode);
        let h = self.dropout.forward(&h, mode);
        let s = match &mut self.shortcut {
            Some((conv, bn)) => {
                let s = conv.forward(x, mode);
                bn.forward(&s, mode)
            }
            None => x.clone(),
        };
        self.relu_out.forward(&(h + &s), mode)
    }

    pub fn backward(&mut self, dy: &Array3<F>) -> Array3<F> {
        let g = self.relu_out.backward(dy);
        let gh = self.dropout.backward(&g);
        let gh = self.bn2.backward(&gh);
        let gh = self.conv2.backward(&gh);
        let gh = self.relu1.backward(&gh);
        let gh = self.bn1.backward(&gh);
        let gh = self.conv1.backward(&gh);
        let gs = match &mut self.shortcut {
            Some((conv, bn)) => {
                let gs = bn.backward(&g);
                conv.backward(&gs)
            }
            None => g,
        };
        gh + &gs
    }

    fn reseed(&mut self, seed: u64) {
        self.dropout.reseed(seed);
    }
}

impl<F: Float> Module<F> for BasicBlock<F> {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        self.conv1.visit(&join(prefix, "conv1"), f);
        self.bn1.visit(&join(prefix, "bn1"), f);
        self.conv2.visit(&join(prefix, "conv2"), f);
        self.bn2.visit(&join(prefix, "bn2"), f);
        if let Some((conv, bn)) = &mut self.shortcut {
            conv.visit(&join(prefix, "shortcut.conv"), f);
            bn.visit(&join(prefix, "shortcut.bn"), f);
        }
    }
}

/// Stem → two residual stages → global average pool → linear.
#[derive(Debug, Clone)]
pub struct ClassifierNet<F> {
    stem: Conv1d<F>,
    stem_bn: BatchNorm1d<F>,
    stem_relu: Relu<F>,
    pool: MaxPool1d,
    blocks: Vec<BasicBlock<F>>,
    avg: AvgPool,
    fc: Linear<F>,
}

impl<F: Float> ClassifierNet<F> {
    pub fn new(arch: &ClsArch, seed: u64, rng: &mut impl Rng) -> Self {
        let (narrow, wide) = (arch.stem_channels, arch.wide_channels);
        let mut blocks = Vec::new();
        for i in 0..arch.blocks_per_stage {
            blocks.push(BasicBlock::new(narrow, narrow, 1, arch.dropout, seed.wrapping_add(i as u64), rng));
        }
        for i in 0..arch.blocks_per_stage {
            let (inputs, stride) = if i == 0 { (narrow, 2) } else { (wide, 1) };
            let s = seed.wrapping_add((arch.blocks_per_stage + i) as u64);
            blocks.push(BasicBlock::new(inputs, wide, stride, arch.dropout, s, rng));
        }
        Self {
            stem: Conv1d::new(arch.input_dim, narrow, 7, rng).stride(2).padding(3),
            stem_bn: BatchNorm1d::new(narrow),
            stem_relu: Relu::new(),
            pool: MaxPool1d::new(),
            blocks,
            avg: AvgPool::default(),
            fc: Linear::new(wide, arch.classes, rng),
        }
    }

    /// `(B, input_dim, T)` to `(B, classes)` logits.
    pub fn forward(&mut self, x: &Array3<F>, mode: Mode) -> Array2<F> {
        let h = self.stem.forward(x, mode);
        let h = self.stem_bn.forward(&h, mode);
        let h = self.stem_relu.forward(&h, mode);
        let mut h = self.pool.forward(&h, mode);
        for b in &mut self.blocks {
            h = b.forward(&h, mode);
        }
        let pooled = self.avg.forward(&h);
        self.fc.forward(&pooled, mode)
    }

    pub fn backward(&mut self, dlogits: &Array2<F>) -> Array3<F> {
        let g = self.fc.backward(dlogits);
        let mut g = self.avg.backward(&g);
        for b in self.blocks.iter_mut().rev() {
            g = b.backward(&g);
        }
        let g = self.pool.backward(&g);
        let g = self.stem_relu.backward(&g);
        let g = self.stem_bn.backward(&g);
        self.stem.backward(&g)
    }

    /// Restart every dropout generator from `seed`.
    pub fn reseed_dropout(&mut self, seed: u64) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.reseed(seed.wrapping_add(i as u64));
        }
    }
}

impl<F: Float> Module<F> for ClassifierNet<F> {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        self.stem.visit(&join(prefix, "stem.conv"), f);
        self.stem_bn.visit(&join(prefix, "stem.bn"), f);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit(&join(prefix, &format!("block{i}")), f);
        }
        self.fc.visit(&join(prefix, "fc"), f);
    }
}
