//! Training-time defenses against membership inference.
//!
//! Dropout, L1 and L2 are applied through hooks in [`crate::numerics`];
//! this module validates their configuration and implements the data-side
//! defenses (adaptive and standard mixup) and clip-and-noise gradients.

mod dp;
mod mixup;
mod schedule;

use serde::{Deserialize, Serialize};

use crate::numerics::NumericsError;

pub use dp::{clipped_noisy_gradient, ClippedSum};
pub use mixup::{
    adamix_label, adamixup_batch, mix_pair, sample_beta, standard_mixup_batch, MixedBatch,
    MixedLabels,
};
pub use schedule::{lambda_at, LambdaSchedule};

#[derive(Debug, thiserror::Error)]
pub enum DefenseError {
    #[error("invalid defense configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub const DEFAULT_DROPOUT_RATE: f64 = 0.5;
pub const DEFAULT_PENALTY: f64 = 1e-4;
pub const DEFAULT_MIXUP_ALPHA: f64 = 1.0;
pub const DEFAULT_LAMBDA_INITIAL: f64 = 1.0;
pub const DEFAULT_LAMBDA_MIN: f64 = 0.1;
pub const DEFAULT_CLIP_NORM: f64 = 1.0;
pub const DEFAULT_NOISE_MULTIPLIER: f64 = 1.0;
/// Nominal privacy budget quoted in reports for the clip-and-noise
/// baseline. No accountant backs it.
pub const NOMINAL_DP_EPSILON: f64 = 1.0;

/// Which defense a model is trained with.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DefenseConfig {
    #[default]
    None,
    Dropout {
        rate: f64,
    },
    L1 {
        coef: f64,
    },
    L2 {
        coef: f64,
    },
    #[serde(rename = "mixup")]
    StandardMixup {
        alpha: f64,
    },
    #[serde(rename = "adamixup")]
    AdaMixup {
        lambda_initial: f64,
        lambda_min: f64,
    },
    #[serde(rename = "dpsgd")]
    ClippedNoisy {
        clip_norm: f64,
        noise_multiplier: f64,
    },
}

impl DefenseConfig {
    pub const TAGS: [&'static str; 7] =
        ["none", "dropout", "l1", "l2", "mixup", "adamixup", "dpsgd"];

    /// The defense named by `tag` with its default hyperparameters.
    pub fn from_tag(tag: &str) -> Result<Self, DefenseError> {
        Ok(match tag {
            "none" => DefenseConfig::None,
            "dropout" => DefenseConfig::Dropout {
                rate: DEFAULT_DROPOUT_RATE,
            },
            "l1" => DefenseConfig::L1 {
                coef: DEFAULT_PENALTY,
            },
            "l2" => DefenseConfig::L2 {
                coef: DEFAULT_PENALTY,
            },
            "mixup" => DefenseConfig::StandardMixup {
                alpha: DEFAULT_MIXUP_ALPHA,
            },
            "adamixup" => DefenseConfig::AdaMixup {
                lambda_initial: DEFAULT_LAMBDA_INITIAL,
                lambda_min: DEFAULT_LAMBDA_MIN,
            },
            "dpsgd" => DefenseConfig::ClippedNoisy {
                clip_norm: DEFAULT_CLIP_NORM,
                noise_multiplier: DEFAULT_NOISE_MULTIPLIER,
            },
            other => {
                return Err(DefenseError::Config(format!(
                    "unknown defense `{other}` (expected one of {})",
                    Self::TAGS.join(", ")
                )))
            }
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            DefenseConfig::None => "none",
            DefenseConfig::Dropout { .. } => "dropout",
            DefenseConfig::L1 { .. } => "l1",
            DefenseConfig::L2 { .. } => "l2",
            DefenseConfig::StandardMixup { .. } => "mixup",
            DefenseConfig::AdaMixup { .. } => "adamixup",
            DefenseConfig::ClippedNoisy { .. } => "dpsgd",
        }
    }

    /// Human-readable column name for reports.
    pub fn label(&self) -> String {
        match self {
            DefenseConfig::None => "w/o".into(),
            DefenseConfig::Dropout { rate } => format!("Dropout (rate={rate})"),
            DefenseConfig::L1 { coef } => format!("L1 (coef={coef})"),
            DefenseConfig::L2 { coef } => format!("L2 (coef={coef})"),
            DefenseConfig::StandardMixup { alpha } => format!("Mixup (alpha={alpha})"),
            DefenseConfig::AdaMixup {
                lambda_initial,
                lambda_min,
            } => format!("AdaMixup ({lambda_initial}->{lambda_min})"),
            DefenseConfig::ClippedNoisy {
                clip_norm,
                noise_multiplier,
            } => format!(
                "DP-SGD (C={clip_norm}, sigma={noise_multiplier}, nominal eps={NOMINAL_DP_EPSILON:.1})"
            ),
        }
    }

    pub fn validate(&self) -> Result<(), DefenseError> {
        let bad = |msg: String| Err(DefenseError::Config(msg));
        match *self {
            DefenseConfig::None => Ok(()),
            DefenseConfig::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                bad(format!("dropout rate {rate} outside [0, 1)"))
            }
            DefenseConfig::L1 { coef } | DefenseConfig::L2 { coef }
                if !(coef >= 0.0 && coef.is_finite()) =>
            {
                bad(format!("penalty coefficient {coef} must be non-negative"))
            }
            DefenseConfig::StandardMixup { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                bad(format!("mixup alpha {alpha} must be positive"))
            }
            DefenseConfig::AdaMixup {
                lambda_initial,
                lambda_min,
            } => LambdaSchedule::new(lambda_initial, lambda_min, 1).map(|_| ()),
            DefenseConfig::ClippedNoisy {
                clip_norm,
                noise_multiplier,
            } if !(clip_norm > 0.0 && clip_norm.is_finite())
                || !(noise_multiplier >= 0.0 && noise_multiplier.is_finite()) =>
            {
                bad(format!(
                    "need clip_norm > 0 and noise_multiplier >= 0, got {clip_norm}, {noise_multiplier}"
                ))
            }
            _ => Ok(()),
        }
    }

    /// Dropout rate the model should be built with.
    pub fn dropout_rate(&self) -> f64 {
        match *self {
            DefenseConfig::Dropout { rate } => rate,
            _ => 0.0,
        }
    }

    /// `(l1, l2)` penalty coefficients added to the weight gradients.
    pub fn penalties(&self) -> (f64, f64) {
        match *self {
            DefenseConfig::L1 { coef } => (coef, 0.0),
            DefenseConfig::L2 { coef } => (0.0, coef),
            _ => (0.0, 0.0),
        }
    }

    /// Mixing schedule over `total_epochs`, for adaptive mixup only.
    pub fn lambda_schedule(
        &self,
        total_epochs: usize,
    ) -> Option<Result<LambdaSchedule, DefenseError>> {
        match *self {
            DefenseConfig::AdaMixup {
                lambda_initial,
                lambda_min,
            } => Some(LambdaSchedule::new(
                lambda_initial,
                lambda_min,
                total_epochs,
            )),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip_through_json() {
        for tag in DefenseConfig::TAGS {
            let cfg = DefenseConfig::from_tag(tag).unwrap();
            assert_eq!(cfg.tag(), tag);
            cfg.validate().unwrap();
            let json = serde_json::to_string(&cfg).unwrap();
            assert!(json.contains(&format!("\"kind\":\"{tag}\"")), "{json}");
            assert_eq!(serde_json::from_str::<DefenseConfig>(&json).unwrap(), cfg);
        }
    }

    #[test]
    fn strict_parsing() {
        assert!(serde_json::from_str::<DefenseConfig>(r#"{"kind":"adamix"}"#).is_err());
        assert!(
            serde_json::from_str::<DefenseConfig>(r#"{"kind":"l2","coef":0.1,"extra":1}"#).is_err()
        );
        let cfg: DefenseConfig =
            serde_json::from_str(r#"{"kind":"adamixup","lambda_initial":1.0,"lambda_min":0.1}"#)
                .unwrap();
        assert_eq!(cfg, DefenseConfig::from_tag("adamixup").unwrap());
        assert!(DefenseConfig::from_tag("memguard").is_err());
    }

    #[test]
    fn validation() {
        assert!(DefenseConfig::Dropout { rate: 1.0 }.validate().is_err());
        assert!(DefenseConfig::L1 { coef: -1.0 }.validate().is_err());
        assert!(DefenseConfig::StandardMixup { alpha: 0.0 }
            .validate()
            .is_err());
        let bad = DefenseConfig::AdaMixup {
            lambda_initial: 0.2,
            lambda_min: 0.5,
        };
        assert!(bad.validate().is_err());
        let bad = DefenseConfig::ClippedNoisy {
            clip_norm: 0.0,
            noise_multiplier: 1.0,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn routing() {
        assert_eq!(
            DefenseConfig::from_tag("dropout").unwrap().dropout_rate(),
            0.5
        );
        assert_eq!(DefenseConfig::L2 { coef: 0.3 }.penalties(), (0.0, 0.3));
        assert!(DefenseConfig::None.lambda_schedule(10).is_none());
        let s = DefenseConfig::from_tag("adamixup")
            .unwrap()
            .lambda_schedule(50)
            .unwrap()
            .unwrap();
        assert_eq!(
            (s.lambda_initial, s.lambda_min, s.total_epochs),
            (1.0, 0.1, 50)
        );
    }
}
