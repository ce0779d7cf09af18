//! Finite-difference gradient verification.

/// Compares an analytic gradient against central differences of `f` at
/// `point` and returns the maximum relative error over components,
/// |fd - analytic| / (|fd| + |analytic| + 1e-12).
pub fn grad_check<F>(mut f: F, point: &[f64], analytic: &[f64], eps: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(point.len(), analytic.len());
    let mut buf = point.to_vec();
    let mut max_err = 0.0f64;
    for i in 0..point.len() {
        let orig = buf[i];
        buf[i] = orig + eps;
        let fp = f(&buf);
        buf[i] = orig - eps;
        let fm = f(&buf);
        buf[i] = orig;
        let fd = (fp - fm) / (2.0 * eps);
        let err = (fd - analytic[i]).abs() / (fd.abs() + analytic[i].abs() + 1e-12);
        max_err = max_err.max(err);
    }
    max_err
}
