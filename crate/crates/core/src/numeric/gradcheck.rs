use super::{Matrix, Scalar};
use crate::error::{Error, Result};

/// Central-difference gradient of `loss_fn` at `params`, one coordinate at a time.
pub fn finite_diff_grad<T: Scalar>(
    mut loss_fn: impl FnMut(&Matrix<T>) -> T,
    params: &Matrix<T>,
    eps: T,
) -> Result<Matrix<T>> {
    if !(eps > T::zero()) {
        return Err(Error::Input(format!("eps must be positive, got {eps}")));
    }
    let two = T::one() + T::one();
    let mut probe = params.clone();
    let mut grad = Matrix::zeros(params.rows(), params.cols());
    for k in 0..params.len() {
        let orig = probe.data()[k];
        probe.data_mut()[k] = orig + eps;
        let plus = loss_fn(&probe);
        probe.data_mut()[k] = orig - eps;
        let minus = loss_fn(&probe);
        probe.data_mut()[k] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!("loss at coordinate {k}")));
        }
        grad.data_mut()[k] = (plus - minus) / (two * eps);
    }
    Ok(grad)
}

/// `|a - b| / max(|a|, |b|, floor)`.
///
/// The floor turns the comparison absolute for gradients that are
/// numerically zero, where central differences only resolve rounding noise.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
