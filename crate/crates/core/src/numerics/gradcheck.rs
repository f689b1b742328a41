use rand::SeedableRng;

use super::loss::cross_entropy_unchecked;
use super::{Gradients, Matrix, MlpModel, NumericsError};

/// Largest relative disagreement between backpropagated gradients and
/// central finite differences of the cross-entropy loss, evaluated without
/// dropout.
pub fn gradient_check(
    model: &MlpModel,
    batch: &Matrix,
    targets: &Matrix,
    step: f64,
) -> Result<f64, NumericsError> {
    let analytic = analytic_gradients(model, batch, targets)?;
    compare_with_finite_differences(model, batch, targets, step, &analytic)
}

pub(crate) fn analytic_gradients(
    model: &MlpModel,
    batch: &Matrix,
    targets: &Matrix,
) -> Result<Gradients, NumericsError> {
    let (logits, trace) = model.forward(batch, false, &mut crate::seed::Rng::seed_from_u64(0))?;
    check_targets(&logits, targets)?;
    let (_, dlogits) = cross_entropy_unchecked(&logits, targets);
    model.backward(&trace, &dlogits)
}

/// Compares a supplied gradient against finite differences. Exposed so a
/// deliberately wrong gradient can be checked for detection.
pub fn compare_with_finite_differences(
    model: &MlpModel,
    batch: &Matrix,
    targets: &Matrix,
    step: f64,
    analytic: &Gradients,
) -> Result<f64, NumericsError> {
    if !(step > 0.0) {
        return Err(NumericsError::Contract(format!(
            "step {step} must be positive"
        )));
    }
    analytic.check_compatible(&Gradients::zeros_like(model))?;
    let loss_at = |m: &MlpModel| -> Result<f64, NumericsError> {
        let logits = m.predict_logits(batch)?;
        check_targets(&logits, targets)?;
        Ok(cross_entropy_unchecked(&logits, targets).0)
    };

    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (index, a) in analytic.values().enumerate() {
        let original = param_mut(&mut probe, index);
        let saved = *original;
        *original = saved + step;
        let plus = loss_at(&probe)?;
        *param_mut(&mut probe, index) = saved - step;
        let minus = loss_at(&probe)?;
        *param_mut(&mut probe, index) = saved;

        let numeric = (plus - minus) / (2.0 * step);
        let err = (a - numeric).abs() / f64::max(1e-8, a.abs() + numeric.abs());
        if err.is_finite() {
            worst = worst.max(err);
        } else {
            return Err(NumericsError::NonFinite("gradient check"));
        }
    }
    Ok(worst)
}

fn check_targets(logits: &Matrix, targets: &Matrix) -> Result<(), NumericsError> {
    if logits.shape() != targets.shape() {
        return Err(NumericsError::Dimension(format!(
            "targets {}x{} do not match logits {}x{}",
            targets.rows(),
            targets.cols(),
            logits.rows(),
            logits.cols()
        )));
    }
    Ok(())
}

/// Parameter `index` in the flattening order of [`Gradients::values`].
fn param_mut(model: &mut MlpModel, mut index: usize) -> &mut f64 {
    let (weights, biases) = model.parameters_mut();
    for w in weights.iter_mut() {
        let len = w.as_slice().len();
        if index < len {
            return &mut w.as_mut_slice()[index];
        }
        index -= len;
    }
    for b in biases.iter_mut() {
        if index < b.len() {
            return &mut b[index];
        }
        index -= b.len();
    }
    panic!("parameter index out of range");
}
