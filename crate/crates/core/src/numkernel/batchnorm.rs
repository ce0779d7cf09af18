//! Batch normalization with running statistics.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::KernelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Learnable scale/shift plus running statistics for eval-mode use.
///
/// Variances are biased (divide by the batch size); running statistics are
/// exponential moving averages with the given momentum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchNormState {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNormState {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn update_running(&mut self, batch_mean: &Array1<f64>, batch_var: &Array1<f64>) {
        let m = self.momentum;
        self.running_mean
            .zip_mut_with(batch_mean, |r, &b| *r = (1.0 - m) * *r + m * b);
        self.running_var
            .zip_mut_with(batch_var, |r, &b| *r = (1.0 - m) * *r + m * b);
    }
}

/// Per-column mean and biased variance of a batch.
pub(crate) fn batch_stats(batch: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let n = batch.nrows() as f64;
    let mean = batch.mean_axis(Axis(0)).expect("nonempty batch");
    let var = batch.map_axis(Axis(0), |col| col.iter().map(|&v| v * v).sum::<f64>() / n)
        - &mean.mapv(|m| m * m);
    (mean, var.mapv(|v| v.max(0.0)))
}

/// Standardize per column, scale by gamma, shift by beta.
///
/// Train mode uses batch statistics (requires >= 2 rows) and updates the
/// running statistics; eval mode uses the running statistics unchanged.
pub fn batch_norm(
    batch: &Array2<f64>,
    state: &mut BatchNormState,
    mode: Mode,
) -> Result<Array2<f64>, KernelError> {
    match mode {
        Mode::Train => {
            if batch.nrows() < 2 {
                return Err(KernelError::DegenerateBatch(batch.nrows()));
            }
            let (mean, var) = batch_stats(batch);
            state.update_running(&mean, &var);
            Ok(apply_norm(batch, &mean, &var, state))
        }
        Mode::Eval => Ok(batch_norm_eval(batch, state)),
    }
}

/// Eval-mode batch norm: standardize with the running statistics.
pub fn batch_norm_eval(batch: &Array2<f64>, state: &BatchNormState) -> Array2<f64> {
    apply_norm(batch, &state.running_mean, &state.running_var, state)
}

fn apply_norm(
    batch: &Array2<f64>,
    mean: &Array1<f64>,
    var: &Array1<f64>,
    state: &BatchNormState,
) -> Array2<f64> {
    let inv_std = var.mapv(|v| 1.0 / (v + state.eps).sqrt());
    let mut out = batch.clone();
    for mut row in out.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - mean[j]) * inv_std[j] * state.gamma[j] + state.beta[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn constant_column_maps_to_zero() {
        let batch = array![[3.0, -1.0], [3.0, -1.0], [3.0, -1.0]];
        let mut st = BatchNormState::new(2);
        let out = batch_norm(&batch, &mut st, Mode::Train).unwrap();
        for &v in out.iter() {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn unit_variance_column_passes_through() {
        let batch = array![[-1.0], [1.0]];
        let mut st = BatchNormState::new(1);
        st.eps = 1e-12;
        let out = batch_norm(&batch, &mut st, Mode::Train).unwrap();
        assert_abs_diff_eq!(out[[0, 0]], -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(out[[1, 0]], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn zero_gamma_gives_beta_everywhere() {
        let batch = array![[0.3, 7.0], [-2.0, 4.0], [1.5, 0.0]];
        let mut st = BatchNormState::new(2);
        st.gamma.fill(0.0);
        st.beta = array![0.25, -0.5];
        let out = batch_norm(&batch, &mut st, Mode::Train).unwrap();
        for row in out.rows() {
            assert_abs_diff_eq!(row[0], 0.25, epsilon = 1e-12);
            assert_abs_diff_eq!(row[1], -0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn train_mode_rejects_single_row() {
        let batch = array![[1.0, 2.0]];
        let mut st = BatchNormState::new(2);
        assert_eq!(
            batch_norm(&batch, &mut st, Mode::Train),
            Err(KernelError::DegenerateBatch(1))
        );
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_var() {
        let batch = array![[0.1, 5.0], [2.3, -1.0], [-0.7, 2.0], [1.1, 0.5]];
        let mut st = BatchNormState::new(2);
        st.eps = 0.0;
        let out = batch_norm(&batch, &mut st, Mode::Train).unwrap();
        let b = out.nrows() as f64;
        for col in out.columns() {
            let mean: f64 = col.sum() / b;
            let var: f64 = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / b;
            assert!(mean.abs() < 1e-6 * b);
            assert!((var - 1.0).abs() < 1e-6 * b);
        }
    }

    #[test]
    fn eval_mode_uses_running_stats() {
        let mut st = BatchNormState::new(1);
        st.running_mean = array![2.0];
        st.running_var = array![4.0];
        st.eps = 0.0;
        let out = batch_norm(&array![[4.0]], &mut st, Mode::Eval).unwrap();
        assert_abs_diff_eq!(out[[0, 0]], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn running_stats_move_toward_batch_stats() {
        let mut st = BatchNormState::new(1);
        let batch = array![[10.0], [14.0]];
        batch_norm(&batch, &mut st, Mode::Train).unwrap();
        // mean 12, var 4; momentum 0.1 from (0, 1)
        assert_abs_diff_eq!(st.running_mean[0], 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(st.running_var[0], 0.9 + 0.4, epsilon = 1e-12);
    }
}
