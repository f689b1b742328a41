use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::AttackError;
use crate::numerics::{Matrix, MlpModel};

/// What a perturbed prediction must agree with to count as consistent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsistencyReference {
    /// The example's true label.
    #[default]
    TrueLabel,
    /// The model's prediction on the unperturbed input.
    CleanPrediction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelOnlyConfig {
    pub num_perturbations: usize,
    /// Standard deviation of the Gaussian perturbation, per feature.
    pub noise_std: f64,
    pub reference: ConsistencyReference,
}

impl Default for LabelOnlyConfig {
    fn default() -> Self {
        LabelOnlyConfig {
            num_perturbations: 50,
            noise_std: 0.05,
            reference: ConsistencyReference::TrueLabel,
        }
    }
}

impl LabelOnlyConfig {
    pub fn validate(&self) -> Result<(), AttackError> {
        if self.num_perturbations == 0 {
            return Err(AttackError::Contract(
                "need at least one perturbation".into(),
            ));
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(AttackError::Contract(format!(
                "noise_std {} must be positive",
                self.noise_std
            )));
        }
        Ok(())
    }
}

/// Fraction of `predictions` equal to `reference`.
pub fn consistency_from_predictions(predictions: &[usize], reference: usize) -> f64 {
    let hits = predictions.iter().filter(|&&p| p == reference).count();
    hits as f64 / predictions.len() as f64
}

/// Label consistency of `model` around `x` for explicit perturbation rows;
/// perturbed inputs are clamped to `[0, 1]`.
pub fn label_consistency_with(
    model: &MlpModel,
    x: &[f64],
    y: usize,
    perturbations: &Matrix,
    reference: ConsistencyReference,
) -> Result<f64, AttackError> {
    if perturbations.cols() != x.len() {
        return Err(AttackError::Contract(format!(
            "perturbations have {} columns, input has {}",
            perturbations.cols(),
            x.len()
        )));
    }
    let target = match reference {
        ConsistencyReference::TrueLabel => y,
        ConsistencyReference::CleanPrediction => {
            let clean = Matrix::from_vec(1, x.len(), x.to_vec())?;
            model.predict_classes(&clean)?[0]
        }
    };
    let mut batch = perturbations.clone();
    for i in 0..batch.rows() {
        batch
            .row_mut(i)
            .iter_mut()
            .zip(x)
            .for_each(|(d, &v)| *d = (v + *d).clamp(0.0, 1.0));
    }
    Ok(consistency_from_predictions(
        &model.predict_classes(&batch)?,
        target,
    ))
}

/// `P = (1/N)·Σ 1{argmax model(x + δ_i) = y}` with `δ_i ~ N(0, noise_std²·I)`.
pub fn label_consistency<R: Rng + ?Sized>(
    model: &MlpModel,
    x: &[f64],
    y: usize,
    config: &LabelOnlyConfig,
    rng: &mut R,
) -> Result<f64, AttackError> {
    config.validate()?;
    let normal = Normal::new(0.0, config.noise_std).expect("validated std");
    let deltas: Vec<f64> = (0..config.num_perturbations * x.len())
        .map(|_| normal.sample(rng))
        .collect();
    let deltas = Matrix::from_vec(config.num_perturbations, x.len(), deltas)?;
    label_consistency_with(model, x, y, &deltas, config.reference)
}

/// Member when `P ≥ τ_P`.
pub fn label_only_attack(consistency: f64, threshold: f64) -> bool {
    consistency >= threshold
}
