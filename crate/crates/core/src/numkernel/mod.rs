//! Minimal dense numeric layer: softmax, batch normalization, Gumbel noise,
//! Adam, a reverse-mode tape for gradients, and a finite-difference checker.
//!
//! Everything works on `ndarray` matrices in `f64`. There is no threading and
//! no platform-dependent math, so results are reproducible bit for bit.

mod adam;
mod batchnorm;
mod gradcheck;
mod gumbel;
pub mod tape;

pub use adam::{adam_step, AdamState};
pub use batchnorm::{batch_norm, batch_norm_eval, BatchNormState, Mode};
pub use gradcheck::grad_check;
pub use gumbel::gumbel_noise;
pub use tape::{NodeId, Tape};

use ndarray::{Array1, Array2, ArrayView1};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    /// Batch normalization in train mode needs at least two rows.
    #[error("degenerate batch: train-mode batch norm needs >= 2 rows, got {0}")]
    DegenerateBatch(usize),
}

/// Numerically stable softmax: shifts by the max before exponentiating.
///
/// Output sums to 1 and every component is strictly positive.
pub fn softmax(v: ArrayView1<f64>) -> Array1<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = v.mapv(|x| (x - max).exp());
    let sum = out.sum();
    out.mapv_inplace(|x| x / sum);
    out
}

/// Row-wise softmax over a matrix.
pub fn softmax_rows(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|x| x / sum);
    }
    out
}

/// Stable softplus ln(1 + e^x).
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
