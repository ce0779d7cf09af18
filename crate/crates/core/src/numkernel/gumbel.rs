//! Standard Gumbel noise for the concrete / Gumbel-Softmax relaxation.

use ndarray::Array2;
use rand::Rng;

/// i.i.d. samples of -ln(-ln u) with u uniform on (0,1), clamped away from
/// the endpoints so the double log stays finite.
pub fn gumbel_noise<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| {
        let u: f64 = rng.gen::<f64>().clamp(1e-12, 1.0 - 1e-12);
        -(-u.ln()).ln()
    })
}
