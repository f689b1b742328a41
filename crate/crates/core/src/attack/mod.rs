//! Membership-inference attacks.
//!
//! * `A1`: logistic attack classifier over the top-3 sorted posteriors,
//!   trained on shadow-model member/non-member records.
//! * `A2`: threshold on the true-label confidence `F(x)_y ≥ τ`, with τ
//!   calibrated on shadow records.
//! * `A3`: label-only attack thresholding the fraction of Gaussian
//!   perturbations whose predicted label stays equal to `y`.

mod classifier;
mod confidence;
mod eval;
mod label_only;
mod threshold;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::numerics::NumericsError;

pub use classifier::{
    train_attack_classifier, AttackClassifier, ATTACK_ITERATIONS, ATTACK_LEARNING_RATE,
};
pub use confidence::{collect_confidences, ConfidenceRecord};
pub use eval::{evaluate_attack, AttackReport};
pub use label_only::{
    consistency_from_predictions, label_consistency, label_consistency_with, label_only_attack,
    ConsistencyReference, LabelOnlyConfig,
};
pub use threshold::{
    balanced_accuracy, calibrate_scores, calibrate_threshold, threshold_attack, Calibration,
    ThresholdMode, ThresholdRule,
};

#[derive(Debug, thiserror::Error)]
pub enum AttackError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttackKind {
    A1,
    A2,
    A3,
}

impl AttackKind {
    pub const ALL: [AttackKind; 3] = [AttackKind::A1, AttackKind::A2, AttackKind::A3];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::A1 => "A1",
            AttackKind::A2 => "A2",
            AttackKind::A3 => "A3",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AttackKind {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A1" | "a1" => Ok(AttackKind::A1),
            "A2" | "a2" => Ok(AttackKind::A2),
            "A3" | "a3" => Ok(AttackKind::A3),
            other => Err(AttackError::Contract(format!("unknown attack `{other}`"))),
        }
    }
}
