//! Classification loss and metrics.

use crate::error::{shape_err, Result};
use crate::tensor::Tensor4;

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the
/// logits (`B × K × 1 × 1`).
pub fn softmax_cross_entropy(logits: &Tensor4, labels: &[usize]) -> Result<(f64, Tensor4)> {
    let [b, k, h, w] = logits.dims();
    if h * w != 1 || labels.len() != b {
        return shape_err(format!(
            "cross-entropy expects B x K x 1 x 1 logits with B labels, got {:?} and {} labels",
            logits.dims(),
            labels.len()
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return shape_err(format!("label {bad} out of range for {k} classes"));
    }
    let mut grad = Tensor4::zeros(logits.dims());
    let mut loss = 0.0;
    for (bi, &label) in labels.iter().enumerate() {
        let row = logits.item(bi);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[label];
        let g = grad.item_mut(bi);
        for (j, v) in row.iter().enumerate() {
            g[j] = ((v - log_z).exp() - if j == label { 1.0 } else { 0.0 }) / b as f64;
        }
    }
    Ok((loss / b as f64, grad))
}

pub fn predictions(logits: &Tensor4) -> Vec<usize> {
    (0..logits.batch())
        .map(|b| {
            let row = logits.item(b);
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Fraction of rows whose arg-max equals the label.
pub fn accuracy(logits: &Tensor4, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions(logits).iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}
