use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AttackError, ConfidenceRecord};

pub const ATTACK_ITERATIONS: usize = 500;
pub const ATTACK_LEARNING_RATE: f64 = 0.1;

/// Logistic membership classifier over the three largest posterior values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackClassifier {
    pub weights: [f64; 3],
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl AttackClassifier {
    /// Membership probability for `record`.
    pub fn predict_proba(&self, record: &ConfidenceRecord) -> f64 {
        let x = record.top3();
        let z = self.bias + self.weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>();
        sigmoid(z)
    }

    pub fn predict(&self, record: &ConfidenceRecord) -> bool {
        self.predict_proba(record) >= 0.5
    }
}

/// Full-batch gradient descent on the class-balanced logistic loss, label 1
/// for shadow members and 0 for shadow non-members.
pub fn train_attack_classifier<R: Rng + ?Sized>(
    members: &[ConfidenceRecord],
    nonmembers: &[ConfidenceRecord],
    rng: &mut R,
) -> Result<AttackClassifier, AttackError> {
    if members.is_empty() || nonmembers.is_empty() {
        return Err(AttackError::Calibration(
            "attack classifier needs member and non-member shadow records".into(),
        ));
    }
    let init = Normal::new(0.0, 0.01).expect("positive std");
    let mut clf = AttackClassifier {
        weights: [init.sample(rng), init.sample(rng), init.sample(rng)],
        bias: 0.0,
    };
    let samples: Vec<([f64; 3], f64, f64)> = members
        .iter()
        .map(|r| (r.top3(), 1.0, 0.5 / members.len() as f64))
        .chain(
            nonmembers
                .iter()
                .map(|r| (r.top3(), 0.0, 0.5 / nonmembers.len() as f64)),
        )
        .collect();
    for _ in 0..ATTACK_ITERATIONS {
        let mut gw = [0.0; 3];
        let mut gb = 0.0;
        for (x, y, weight) in &samples {
            let z = clf.bias + clf.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            let err = weight * (sigmoid(z) - y);
            gw.iter_mut().zip(x).for_each(|(g, v)| *g += err * v);
            gb += err;
        }
        clf.weights
            .iter_mut()
            .zip(&gw)
            .for_each(|(w, g)| *w -= ATTACK_LEARNING_RATE * g);
        clf.bias -= ATTACK_LEARNING_RATE * gb;
    }
    Ok(clf)
}
