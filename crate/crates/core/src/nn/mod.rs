//! Small hand-written neural-network toolkit over `(batch, channels, time)`
//! tensors: layers with explicit forward/backward passes, AdamW, the losses
//! used by the tokenizer and the classifier, and a finite-difference
//! gradient checker.
//!
//! Layers are generic over the float type so models train in `f32` and are
//! checked against finite differences in `f64`.

mod conv;
pub mod gradcheck;
mod layers;
mod loss;
mod optim;

use ndarray::{ArrayD, IxDyn, NdFloat};
use num_traits::FromPrimitive;
use rand::Rng;

pub use conv::Conv1d;
pub use layers::{AvgPool, BatchNorm1d, Dropout, Linear, MaxPool1d, Relu, Upsample2};
pub use loss::{cross_entropy, smooth_l1};
pub use optim::{AdamW, AdamWConfig};

pub trait Float: NdFloat + FromPrimitive + Default {}

impl Float for f32 {}
impl Float for f64 {}

pub(crate) fn cast<F: Float>(x: f64) -> F {
    F::from_f64(x).expect("representable")
}

/// Whether a forward pass records what the backward pass needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, dropout active, activations cached.
    Train,
    /// Running statistics, no dropout, nothing cached.
    Eval,
}

/// A named tensor owned by a layer. Buffers such as batch-norm running
/// statistics are stored as non-trainable params so checkpoints see them.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<F> {
    pub value: ArrayD<F>,
    pub grad: ArrayD<F>,
    pub trainable: bool,
}

impl<F: Float> Param<F> {
    pub fn new(value: ArrayD<F>) -> Self {
        let grad = ArrayD::zeros(value.raw_dim());
        Self { value, grad, trainable: true }
    }

    pub fn buffer(value: ArrayD<F>) -> Self {
        Self { trainable: false, ..Self::new(value) }
    }

    /// Uniform in `[-bound, bound]`.
    pub fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Self {
        let value = ArrayD::from_shape_simple_fn(IxDyn(shape), || cast(rng.gen_range(-bound..=bound)));
        Self::new(value)
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(F::zero());
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Anything that owns params. Names are dotted paths, stable across runs.
pub trait Module<F: Float> {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>));

    fn zero_grad(&mut self) {
        self.visit("", &mut |_, p| p.zero_grad());
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, p| {
            if p.trainable {
                n += p.len()
            }
        });
        n
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Copy every param (trainable or not) into a model of another float type
/// with the same structure.
pub fn convert_params<A: Float, B: Float>(src: &mut impl Module<A>, dst: &mut impl Module<B>) {
    let mut values = Vec::new();
    src.visit("", &mut |name, p| values.push((name.to_string(), p.value.mapv(|v| cast::<B>(v.to_f64().unwrap())))));
    let mut it = values.into_iter();
    dst.visit("", &mut |name, p| {
        let (n, v) = it.next().expect("same structure");
        assert_eq!(n, name, "param order differs");
        p.value = v;
    });
}
