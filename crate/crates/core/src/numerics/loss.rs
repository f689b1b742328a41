use super::{Matrix, NumericsError};

const TARGET_SUM_TOLERANCE: f64 = 1e-9;

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        softmax_in_place(out.row_mut(i));
    }
    out
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

/// One-hot encoding of `labels` over `num_classes` columns.
pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Matrix, NumericsError> {
    let mut m = Matrix::zeros(labels.len(), num_classes);
    for (i, &y) in labels.iter().enumerate() {
        if y >= num_classes {
            return Err(NumericsError::Contract(format!(
                "label {y} at row {i} outside 0..{num_classes}"
            )));
        }
        m[(i, y)] = 1.0;
    }
    Ok(m)
}

/// Mean cross-entropy between `softmax(logits)` and per-row target
/// distributions, with its gradient with respect to the logits.
pub fn softmax_cross_entropy(
    logits: &Matrix,
    targets: &Matrix,
) -> Result<(f64, Matrix), NumericsError> {
    if logits.shape() != targets.shape() {
        return Err(NumericsError::Dimension(format!(
            "logits {}x{} vs targets {}x{}",
            logits.rows(),
            logits.cols(),
            targets.rows(),
            targets.cols()
        )));
    }
    for (i, row) in targets.row_iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > TARGET_SUM_TOLERANCE || row.iter().any(|&t| t < 0.0) {
            return Err(NumericsError::Contract(format!(
                "target row {i} is not a probability distribution (sum {sum})"
            )));
        }
    }
    Ok(cross_entropy_unchecked(logits, targets))
}

/// Same as [`softmax_cross_entropy`] without validating the targets.
pub(crate) fn cross_entropy_unchecked(logits: &Matrix, targets: &Matrix) -> (f64, Matrix) {
    let n = logits.rows() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for i in 0..logits.rows() {
        let z = logits.row(i);
        let t = targets.row(i);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let g = grad.row_mut(i);
        for c in 0..z.len() {
            let log_p = z[c] - max - log_sum;
            if t[c] != 0.0 {
                loss -= t[c] * log_p;
            }
            g[c] = (log_p.exp() - t[c]) / n;
        }
    }
    (loss / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_target_gives_ln2() {
        let logits = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        let targets = Matrix::from_rows(&[[0.5, 0.5]]).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &targets).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let logits = Matrix::from_rows(&[[1000.0, 0.0]]).unwrap();
        let targets = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, &targets).unwrap();
        assert!(loss.is_finite() && loss.abs() < 1e-300);
        assert!(grad.is_finite());
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let logits = Matrix::from_rows(&[[3.0, -1.0, 0.5], [0.2, 0.1, 4.0]]).unwrap();
        let targets = one_hot(&[0, 2], 3).unwrap();
        let (_, grad) = softmax_cross_entropy(&logits, &targets).unwrap();
        for row in grad.row_iter() {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unnormalized_targets() {
        let logits = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        let targets = Matrix::from_rows(&[[0.5, 0.6]]).unwrap();
        assert!(matches!(
            softmax_cross_entropy(&logits, &targets),
            Err(NumericsError::Contract(_))
        ));
        let wrong_shape = Matrix::from_rows(&[[1.0, 0.0, 0.0]]).unwrap();
        assert!(softmax_cross_entropy(&logits, &wrong_shape).is_err());
    }

    #[test]
    fn one_hot_rejects_out_of_range() {
        assert!(one_hot(&[0, 3], 3).is_err());
    }
}
