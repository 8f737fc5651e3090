use super::{Matrix, Scalar};
use crate::error::{Error, Result};

/// Column-wise softmax with max subtraction.
pub fn softmax<T: Scalar>(logits: &Matrix<T>) -> Matrix<T> {
    let mut out = logits.clone();
    for c in 0..logits.cols() {
        let mut max = T::neg_infinity();
        for r in 0..logits.rows() {
            max = max.max(logits[(r, c)]);
        }
        let mut sum = T::zero();
        for r in 0..logits.rows() {
            let e = (logits[(r, c)] - max).exp();
            out[(r, c)] = e;
            sum += e;
        }
        for r in 0..logits.rows() {
            out[(r, c)] /= sum;
        }
    }
    out
}

/// Negative log-probability of `target` under `softmax(logits)` and its
/// gradient `softmax(logits) - onehot(target)`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Matrix<T>, target: usize) -> Result<(T, Matrix<T>)> {
    if logits.cols() != 1 {
        return Err(Error::Dimension {
            op: "softmax_cross_entropy",
            lhs: logits.shape(),
            rhs: (logits.rows(), 1),
        });
    }
    let v = logits.rows();
    if target >= v {
        return Err(Error::Index { index: target, len: v });
    }
    let max = logits.data().iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let sum: T = logits.data().iter().map(|&x| (x - max).exp()).sum();
    let log_z = max + sum.ln();
    let loss = log_z - logits.data()[target];

    let mut grad = logits.map(|x| (x - log_z).exp());
    grad.data_mut()[target] -= T::one();
    Ok((loss, grad))
}
