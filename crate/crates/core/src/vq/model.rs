use ndarray::Array3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{join, Conv1d, Float, Mode, Module, Param, Relu, Upsample2};

/// Number of stride-2 stages; the temporal downsampling rate is `2^STAGES`.
pub const STAGES: usize = 2;
pub const DOWNSAMPLE: usize = 1 << STAGES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DilationSchedule {
    /// Dilation 9 in every residual block.
    Constant9,
    /// Dilations 9, 3, 1.
    Descending,
}

impl DilationSchedule {
    pub fn dilation(self, block: usize) -> usize {
        match self {
            DilationSchedule::Constant9 => 9,
            DilationSchedule::Descending => [9, 3, 1].get(block).copied().unwrap_or(1),
        }
    }
}

/// Architecture hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqArch {
    pub input_dim: usize,
    pub width: usize,
    pub code_dim: usize,
    pub codebook_size: usize,
    pub res_blocks: usize,
    pub dilation: DilationSchedule,
}

impl VqArch {
    /// The full-size architecture: 512 channels, 512 codes of width 512.
    pub fn paper() -> Self {
        Self {
            input_dim: crate::features::FEATURE_DIM,
            width: 512,
            code_dim: 512,
            codebook_size: 512,
            res_blocks: 3,
            dilation: DilationSchedule::Constant9,
        }
    }

    /// Narrower channels for single-core runs; codebook size unchanged.
    pub fn desk() -> Self {
        Self { width: 64, code_dim: 64, ..Self::paper() }
    }
}

/// `x + conv1x1(relu(conv_dilated(relu(x))))`.
#[derive(Debug, Clone)]
pub struct ResConvBlock<F> {
    relu1: Relu<F>,
    conv1: Conv1d<F>,
    relu2: Relu<F>,
    conv2: Conv1d<F>,
}

impl<F: Float> ResConvBlock<F> {
    pub fn new(width: usize, dilation: usize, rng: &mut impl Rng) -> Self {
        Self {
            relu1: Relu::new(),
            conv1: Conv1d::new(width, width, 3, rng).padding(dilation).dilation(dilation),
            relu2: Relu::new(),
            conv2: Conv1d::new(width, width, 1, rng),
        }
    }

    pub fn forward(&mut self, x: &Array3<F>, mode: Mode) -> Array3<F> {
        let h = self.relu1.forward(x, mode);
        let h = self.conv1.forward(&h, mode);
        let h = self.relu2.forward(&h, mode);
        self.conv2.forward(&h, mode) + x
    }

    pub fn backward(&mut self, dy: &Array3<F>) -> Array3<F> {
        let g = self.conv2.backward(dy);
        let g = self.relu2.backward(&g);
        let g = self.conv1.backward(&g);
        self.relu1.backward(&g) + dy
    }
}

impl<F: Float> Module<F> for ResConvBlock<F> {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        self.conv1.visit(&join(prefix, "conv1"), f);
        self.conv2.visit(&join(prefix, "conv2"), f);
    }
}

#[derive(Debug, Clone)]
pub struct Resnet1d<F> {
    blocks: Vec<ResConvBlock<F>>,
}

impl<F: Float> Resnet1d<F> {
    pub fn new(width: usize, arch: &VqArch, rng: &mut impl Rng) -> Self {
        Self { blocks: (0..arch.res_blocks).map(|i| ResConvBlock::new(width, arch.dilation.dilation(i), rng)).collect() }
    }

    pub fn forward(&mut self, x: &Array3<F>, mode: Mode) -> Array3<F> {
        let mut h = x.clone();
        for b in &mut self.blocks {
            h = b.forward(&h, mode);
        }
        h
    }

    pub fn backward(&mut self, dy: &Array3<F>) -> Array3<F> {
        let mut g = dy.clone();
        for b in self.blocks.iter_mut().rev() {
            g = b.backward(&g);
        }
        g
    }
}

impl<F: Float> Module<F> for Resnet1d<F> {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit(&join(prefix, &i.to_string()), f);
        }
    }
}

/// Conv → ReLU → 2 × [stride-2 conv → residual stack] → conv.
#[derive(Debug, Clone)]
pub struct Encoder<F> {
    conv_in: Conv1d<F>,
    relu: Relu<F>,
    stages: Vec<(Conv1d<F>, Resnet1d<F>)>,
    conv_out: Conv1d<F>,
}

impl<F: Float> Encoder<F> {
    pub fn new(arch: &VqArch, rng: &mut impl Rng) -> Self {
        let w = arch.width;
        let conv_in = Conv1d::new(arch.input_dim, w, 3, rng).padding(1);
        let stages = (0..STAGES)
            .map(|_| (Conv1d::new(w, w, 4, rng).stride(2).padding(1), Resnet1d::new(w, arch, rng)))
            .collect();
        let conv_out = Conv1d::new(w, arch.code_dim, 3, rng).padding(1);
        Self { conv_in, relu: Relu::new(), stages, conv_out }
    }

    /// `(B, input_dim, T)` to `(B, code_dim, T / 4)`.
    pub fn forward(&mut self, x: &Array3<F>, mode: Mode) -> Array3<F> {
        let h = self.conv_in.forward(x, mode);
        let mut h = self.relu.forward(&h, mode);
        for (down, res) in &mut self.stages {
            h = down.forward(&h, mode);
            h = res.forward(&h, mode);
        }
        self.conv_out.forward(&h, mode)
    }

    pub fn backward(&mut self, dy: &Array3<F>) -> Array3<F> {
        let mut g = self.conv_out.backward(dy);
        for (down, res) in self.stages.iter_mut().rev() {
            g = res.backward(&g);
            g = down.backward(&g);
        }
        let g = self.relu.backward(&g);
        self.conv_in.backward(&g)
    }
}

impl<F: Float> Module<F> for Encoder<F> {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        self.conv_in.visit(&join(prefix, "conv_in"), f);
        for (i, (down, res)) in self.stages.iter_mut().enumerate() {
            down.visit(&join(prefix, &format!("stage{i}.down")), f);
            res.visit(&join(prefix, &format!("stage{i}.res")), f);
        }
        self.conv_out.visit(&join(prefix, "conv_out"), f);
    }
}

/// Conv → ReLU → 2 × [residual stack → upsample → conv] → conv → ReLU → conv.
#[derive(Debug, Clone)]
pub struct Decoder<F> {
    conv_in: Conv1d<F>,
    relu_in: Relu<F>,
    stages: Vec<(Resnet1d<F>, Conv1d<F>)>,
    conv_mid: Conv1d<F>,
    relu_out: Relu<F>,
    conv_out: Conv1d<F>,
}

impl<F: Float> Decoder<F> {
    pub fn new(arch: &VqArch, rng: &mut impl Rng) -> Self {
        let w = arch.width;
        let conv_in = Conv1d::new(arch.code_dim, w, 3, rng).padding(1);
        let stages = (0..STAGES).map(|_| (Resnet1d::new(w, arch, rng), Conv1d::new(w, w, 3, rng).padding(1))).collect();
        let conv_mid = Conv1d::new(w, w, 3, rng).padding(1);
        let conv_out = Conv1d::new(w, arch.input_dim, 3, rng).padding(1);
        Self { conv_in, relu_in: Relu::new(), stages, conv_mid, relu_out: Relu::new(), conv_out }
    }

    /// `(B, code_dim, N)` to `(B, input_dim, 4N)`.
    pub fn forward(&mut self, z: &Array3<F>, mode: Mode) -> Array3<F> {
        let h = self.conv_in.forward(z, mode);
        let mut h = self.relu_in.forward(&h, mode);
        for (res, conv) in &mut self.stages {
            h = res.forward(&h, mode);
            h = Upsample2.forward(&h);
            h = conv.forward(&h, mode);
        }
        let h = self.conv_mid.forward(&h, mode);
        let h = self.relu_out.forward(&h, mode);
        self.conv_out.forward(&h, mode)
    }

    pub fn backward(&mut self, dy: &Array3<F>) -> Array3<F> {
        let g = self.conv_out.backward(dy);
        let g = self.relu_out.backward(&g);
        let mut g = self.conv_mid.backward(&g);
        for (res, conv) in self.stages.iter_mut().rev() {
            g = conv.backward(&g);
            g = Upsample2.backward(&g);
            g = res.backward(&g);
        }
        let g = self.relu_in.backward(&g);
        self.conv_in.backward(&g)
    }
}

impl<F: Float> Module<F> for Decoder<F> {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        self.conv_in.visit(&join(prefix, "conv_in"), f);
        for (i, (res, conv)) in self.stages.iter_mut().enumerate() {
            res.visit(&join(prefix, &format!("stage{i}.res")), f);
            conv.visit(&join(prefix, &format!("stage{i}.conv")), f);
        }
        self.conv_mid.visit(&join(prefix, "conv_mid"), f);
        self.conv_out.visit(&join(prefix, "conv_out"), f);
    }
}
