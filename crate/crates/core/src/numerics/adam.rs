use super::{Gradients, MlpModel, NumericsError};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Moment estimates for Adam, shaped like the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    first_moment: Gradients,
    second_moment: Gradients,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(model: &MlpModel) -> Self {
        AdamState {
            first_moment: Gradients::zeros_like(model),
            second_moment: Gradients::zeros_like(model),
            step: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &Gradients {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &Gradients {
        &self.second_moment
    }
}

/// One bias-corrected Adam update of `model` in place.
pub fn adam_step(
    model: &mut MlpModel,
    grads: &Gradients,
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<(), NumericsError> {
    state.first_moment.check_compatible(grads)?;
    state.step += 1;
    let t = state.step as f64;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let correction1 = 1.0 - b1.powf(t);
    let correction2 = 1.0 - b2.powf(t);

    let (weights, biases) = model.parameters_mut();
    let params = weights
        .iter_mut()
        .flat_map(|w| w.as_mut_slice().iter_mut())
        .chain(biases.iter_mut().flatten());
    let moments = state
        .first_moment
        .values_mut()
        .zip(state.second_moment.values_mut());
    for ((p, (m, v)), g) in params.zip(moments).zip(grads.values()) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Adds L1 and L2 penalty gradients to the weight gradients. Biases are not
/// penalized.
pub fn add_regularization_gradient(
    grads: &mut Gradients,
    model: &MlpModel,
    l1_coef: f64,
    l2_coef: f64,
) -> Result<(), NumericsError> {
    if !(l1_coef >= 0.0 && l2_coef >= 0.0) {
        return Err(NumericsError::Contract(format!(
            "regularization coefficients must be non-negative (l1 {l1_coef}, l2 {l2_coef})"
        )));
    }
    if l1_coef == 0.0 && l2_coef == 0.0 {
        return Ok(());
    }
    if grads.weights.len() != model.weights().len() {
        return Err(NumericsError::Dimension(
            "gradient and model layer counts differ".into(),
        ));
    }
    for (g, w) in grads.weights.iter_mut().zip(model.weights()) {
        if g.shape() != w.shape() {
            return Err(NumericsError::Dimension(
                "gradient and weight shapes differ".into(),
            ));
        }
        for (gv, &wv) in g.as_mut_slice().iter_mut().zip(w.as_slice()) {
            let sign = if wv > 0.0 {
                1.0
            } else if wv < 0.0 {
                -1.0
            } else {
                0.0
            };
            *gv += l1_coef * sign + 2.0 * l2_coef * wv;
        }
    }
    Ok(())
}
