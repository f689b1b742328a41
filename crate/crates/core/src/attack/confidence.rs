use serde::{Deserialize, Serialize};

use super::AttackError;
use crate::data::Dataset;
use crate::numerics::{argmax, softmax_in_place, MlpModel};

/// Rows pushed through the model at once when collecting posteriors.
const INFERENCE_CHUNK: usize = 1024;

/// The model's posterior for one example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRecord {
    pub probabilities: Vec<f64>,
    pub true_label: usize,
    pub predicted_label: usize,
}

impl ConfidenceRecord {
    pub fn new(probabilities: Vec<f64>, true_label: usize) -> Result<Self, AttackError> {
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(AttackError::Contract(format!(
                "probabilities must lie in [0,1] and sum to 1 (sum {sum})"
            )));
        }
        if true_label >= probabilities.len() {
            return Err(AttackError::Contract(format!(
                "label {true_label} outside 0..{}",
                probabilities.len()
            )));
        }
        let predicted_label = argmax(&probabilities);
        Ok(ConfidenceRecord {
            probabilities,
            true_label,
            predicted_label,
        })
    }

    /// Probability assigned to the true label.
    pub fn true_confidence(&self) -> f64 {
        self.probabilities[self.true_label]
    }

    /// The three largest probabilities in descending order, zero-padded.
    pub fn top3(&self) -> [f64; 3] {
        let mut sorted = self.probabilities.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut out = [0.0; 3];
        for (o, p) in out.iter_mut().zip(sorted) {
            *o = p;
        }
        out
    }
}

/// Inference-mode softmax posteriors for the listed rows of `dataset`.
pub fn collect_confidences(
    model: &MlpModel,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<Vec<ConfidenceRecord>, AttackError> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= dataset.len()) {
        return Err(AttackError::Contract(format!(
            "index {bad} outside dataset of {} rows",
            dataset.len()
        )));
    }
    let mut out = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(INFERENCE_CHUNK) {
        let (x, y) = dataset.select(chunk);
        let logits = model.predict_logits(&x)?;
        for (row, &label) in logits.row_iter().zip(&y) {
            let mut p = row.to_vec();
            softmax_in_place(&mut p);
            let predicted_label = argmax(&p);
            out.push(ConfidenceRecord {
                probabilities: p,
                true_label: label,
                predicted_label,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    #[test]
    fn zero_model_is_uniform() {
        let x = Matrix::from_rows(&(0..10).map(|i| [i as f64 / 10.0, 0.5]).collect::<Vec<_>>())
            .unwrap();
        let d = Dataset::new(x, (0..10).collect(), 10, "d").unwrap();
        let model = MlpModel::zeros(&[2, 4, 10], 0.0).unwrap();
        let records = collect_confidences(&model, &d, &[0, 3, 3, 9]).unwrap();
        assert_eq!(records.len(), 4);
        for r in &records {
            assert!(r.probabilities.iter().all(|&p| (p - 0.1).abs() < 1e-15));
        }
        assert_eq!(
            records,
            collect_confidences(&model, &d, &[0, 3, 3, 9]).unwrap()
        );
        assert!(collect_confidences(&model, &d, &[10]).is_err());
    }

    #[test]
    fn top3_pads_and_sorts() {
        let r = ConfidenceRecord::new(vec![0.3, 0.7], 0).unwrap();
        assert_eq!(r.top3(), [0.7, 0.3, 0.0]);
        assert_eq!(r.true_confidence(), 0.3);
        assert_eq!(r.predicted_label, 1);
        assert!(ConfidenceRecord::new(vec![0.3, 0.6], 0).is_err());
        assert!(ConfidenceRecord::new(vec![0.3, 0.7], 2).is_err());
    }
}
