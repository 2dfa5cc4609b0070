//! Dense feed-forward networks with manual backpropagation.
//!
//! Everything is `f64`. Batches are `ndarray` matrices with one sample per row.

mod layer;
mod mlp;
mod optim;

pub use layer::{prelu, sigmoid, softmax, Activation, DenseLayer, PRELU_INIT_SLOPE};
pub use mlp::{Gradients, LayerGradients, Mlp, Tape, MLP_FORMAT_VERSION};
pub use optim::{LrSchedule, Optimizer, OptimizerKind};

use ndarray::{Array2, ArrayView2};

use crate::{Error, Result};

/// Probabilities are clamped to this before taking the log.
pub const PROB_CLAMP: f64 = 1e-12;

/// `-ln(probs[target])` with the probability clamped to `[1e-12, 1]`.
pub fn cross_entropy_loss(probs: &[f64], target: usize) -> Result<f64> {
    let p = probs.get(target).ok_or_else(|| {
        Error::ContractViolation(format!(
            "target class {target} out of range for {} classes",
            probs.len()
        ))
    })?;
    Ok(-p.clamp(PROB_CLAMP, 1.0).ln())
}

/// Mean cross-entropy over a batch and its gradient with respect to the
/// network output (the probabilities).
pub fn cross_entropy_batch(
    probs: ArrayView2<f64>,
    targets: &[usize],
) -> Result<(f64, Array2<f64>)> {
    if probs.nrows() != targets.len() || targets.is_empty() {
        return Err(Error::Shape(format!(
            "{} probability rows for {} targets",
            probs.nrows(),
            targets.len()
        )));
    }
    let n = targets.len() as f64;
    let mut grad = Array2::zeros(probs.raw_dim());
    let mut total = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        let row = probs.row(r);
        total += cross_entropy_loss(row.as_slice().unwrap_or(&row.to_vec()), t)?;
        let p = row[t];
        if p >= PROB_CLAMP {
            grad[[r, t]] = -1.0 / (p * n);
        }
    }
    Ok((total / n, grad))
}
