use serde::{Deserialize, Serialize};

use super::{AttackError, AttackKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack: AttackKind,
    pub accuracy: f64,
    pub true_positive_rate: f64,
    pub false_positive_rate: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

/// Scores membership predictions against ground truth (`true` = member).
pub fn evaluate_attack(
    attack: AttackKind,
    predictions: &[bool],
    truth: &[bool],
) -> Result<AttackReport, AttackError> {
    if predictions.len() != truth.len() {
        return Err(AttackError::Contract(format!(
            "{} predictions for {} ground-truth labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(AttackError::Contract("empty evaluation set".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in predictions.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let rate = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    Ok(AttackReport {
        attack,
        accuracy: (tp + tn) as f64 / truth.len() as f64,
        true_positive_rate: rate(tp, tp + fn_),
        false_positive_rate: rate(fp, fp + tn),
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
    })
}
