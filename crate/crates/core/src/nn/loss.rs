//! Batch-mean losses that return their gradient with respect to the network output.

use super::{sigmoid, Matrix};
use crate::error::{Error, Result};

/// Numerically stable `ln(1 + e^z)`.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Binary cross-entropy on a single logit column against targets in `[0, 1]`.
pub fn bce_with_logits(logits: &Matrix, targets: &[f64]) -> Result<(f64, Matrix)> {
    if logits.cols() != 1 || logits.rows() != targets.len() || targets.is_empty() {
        return Err(Error::invalid(format!(
            "bce expects an n x 1 logit column with n targets, got {}x{} and {}",
            logits.rows(),
            logits.cols(),
            targets.len()
        )));
    }
    let n = targets.len() as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(logits.rows(), 1);
    for (i, &t) in targets.iter().enumerate() {
        let z = logits.get(i, 0);
        loss += softplus(z) - t * z;
        grad.set(i, 0, (sigmoid(z) - t) / n);
    }
    Ok((loss / n, grad))
}

/// Row-wise softmax.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Cross-entropy between softmax(logits) and (possibly soft) target distributions.
pub fn softmax_cross_entropy(logits: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
    if logits.rows() != targets.rows() || logits.cols() != targets.cols() || logits.rows() == 0 {
        return Err(Error::invalid(format!(
            "cross-entropy shapes differ: logits {}x{}, targets {}x{}",
            logits.rows(),
            logits.cols(),
            targets.rows(),
            targets.cols()
        )));
    }
    let n = logits.rows() as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let z = logits.row(r);
        let t = targets.row(r);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let g = grad.row_mut(r);
        for c in 0..z.len() {
            loss -= t[c] * (z[c] - lse);
            g[c] = ((z[c] - lse).exp() - t[c]) / n;
        }
    }
    Ok((loss / n, grad))
}

/// Mean over rows of the squared euclidean error.
pub fn squared_error(output: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if output.rows() != target.rows() || output.cols() != target.cols() || output.rows() == 0 {
        return Err(Error::invalid("squared error shapes differ"));
    }
    let n = output.rows() as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(output.rows(), output.cols());
    for ((g, &o), &t) in grad.values_mut().iter_mut().zip(output.values()).zip(target.values()) {
        loss += (o - t) * (o - t);
        *g = 2.0 * (o - t) / n;
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_at_zero_logit_is_ln2() {
        let z = Matrix::zeros(4, 1);
        let (l, g) = bce_with_logits(&z, &[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(g.values(), &[-0.125, 0.125, -0.125, 0.125]);
    }

    #[test]
    fn bce_is_stable_for_large_logits() {
        let z = Matrix::from_vec(2, 1, vec![800.0, -800.0]).unwrap();
        let (l, _) = bce_with_logits(&z, &[0.0, 1.0]).unwrap();
        assert!((l - 800.0).abs() < 1e-9);
    }

    #[test]
    fn softmax_ce_matches_bce_for_two_classes() {
        // logits (0, z) under softmax equal a single logit z under sigmoid
        let z = 0.7;
        let (l2, _) = softmax_cross_entropy(
            &Matrix::from_vec(1, 2, vec![0.0, z]).unwrap(),
            &Matrix::from_vec(1, 2, vec![0.3, 0.7]).unwrap(),
        )
        .unwrap();
        let (l1, _) = bce_with_logits(&Matrix::from_vec(1, 1, vec![z]).unwrap(), &[0.7]).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
    }
}
