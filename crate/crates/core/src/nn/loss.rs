use ndarray::{Array2, Array3};

use super::{cast, Float};

/// Smooth-L1 (Huber with threshold 1) averaged over the selected elements.
///
/// `weight[b, t]` selects time steps (1 valid, 0 padded); `columns` restricts
/// the loss to a channel range. Returns the loss and its gradient with
/// respect to `pred`.
pub fn smooth_l1<F: Float>(
    pred: &Array3<F>,
    target: &Array3<F>,
    weight: &Array2<F>,
    columns: std::ops::Range<usize>,
) -> (F, Array3<F>) {
    assert_eq!(pred.dim(), target.dim());
    let (b, _, t) = pred.dim();
    assert_eq!(weight.dim(), (b, t));
    let count = weight.sum() * cast::<F>(columns.len() as f64);
    let mut grad = Array3::zeros(pred.dim());
    if count <= F::zero() {
        return (F::zero(), grad);
    }
    let half = cast::<F>(0.5);
    let mut loss = F::zero();
    for ((i, c, k), p) in pred.indexed_iter() {
        let w = weight[(i, k)];
        if !columns.contains(&c) || w == F::zero() {
            continue;
        }
        let d = *p - target[(i, c, k)];
        let (l, g) = if d.abs() < F::one() { (half * d * d, d) } else { (d.abs() - half, d.signum()) };
        loss += w * l;
        grad[(i, c, k)] = w * g / count;
    }
    (loss / count, grad)
}

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. logits.
pub fn cross_entropy<F: Float>(logits: &Array2<F>, labels: &[usize]) -> (F, Array2<F>) {
    let (b, k) = logits.dim();
    assert_eq!(labels.len(), b);
    let mut grad = Array2::zeros((b, k));
    let mut loss = F::zero();
    let inv_b = cast::<F>(1.0 / b as f64);
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.fold(F::neg_infinity(), |m, &v| m.max(v));
        let sum = row.iter().fold(F::zero(), |s, &v| s + (v - max).exp());
        let log_z = max + sum.ln();
        loss += log_z - row[y];
        for j in 0..k {
            let p = (row[j] - log_z).exp();
            grad[(i, j)] = (p - if j == y { F::one() } else { F::zero() }) * inv_b;
        }
    }
    (loss * inv_b, grad)
}
