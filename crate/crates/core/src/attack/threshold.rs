use serde::{Deserialize, Serialize};

use super::{AttackError, ConfidenceRecord};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    #[default]
    Global,
    PerClass,
}

/// Membership threshold on the true-label confidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdRule {
    Global(f64),
    PerClass(Vec<f64>),
}

impl ThresholdRule {
    pub fn threshold_for(&self, class: usize) -> Option<f64> {
        match self {
            ThresholdRule::Global(tau) => Some(*tau),
            ThresholdRule::PerClass(taus) => taus.get(class).copied(),
        }
    }
}

/// Predicts membership when `F(x)_y ≥ τ_y`.
pub fn threshold_attack(
    record: &ConfidenceRecord,
    rule: &ThresholdRule,
) -> Result<bool, AttackError> {
    let tau = rule.threshold_for(record.true_label).ok_or_else(|| {
        AttackError::Contract(format!(
            "rule has no threshold for class {}",
            record.true_label
        ))
    })?;
    Ok(record.true_confidence() >= tau)
}

/// Threshold chosen by [`calibrate_scores`] and the balanced accuracy it
/// achieved on the calibration scores.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub threshold: f64,
    pub balanced_accuracy: f64,
}

/// Balanced accuracy from integer counts; every caller goes through this so
/// equal counts give bit-identical values.
pub fn balanced_accuracy(tp: usize, positives: usize, tn: usize, negatives: usize) -> f64 {
    0.5 * (tp as f64 / positives as f64 + tn as f64 / negatives as f64)
}

/// Sweeps every distinct observed score plus 0 and 1 as the threshold of
/// `score ≥ τ ⇒ member` and keeps the one with the best balanced accuracy,
/// preferring the smallest τ on ties.
pub fn calibrate_scores(members: &[f64], nonmembers: &[f64]) -> Result<Calibration, AttackError> {
    if members.is_empty() || nonmembers.is_empty() {
        return Err(AttackError::Calibration(
            "need at least one member and one non-member score".into(),
        ));
    }
    if members.iter().chain(nonmembers).any(|s| !s.is_finite()) {
        return Err(AttackError::Calibration("non-finite score".into()));
    }
    let mut m = members.to_vec();
    let mut n = nonmembers.to_vec();
    m.sort_by(f64::total_cmp);
    n.sort_by(f64::total_cmp);
    let mut candidates: Vec<f64> = m.iter().chain(&n).copied().chain([0.0, 1.0]).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // Two pointers: `mi` members and `ni` non-members fall strictly below τ.
    let (mut mi, mut ni) = (0, 0);
    let mut best: Option<Calibration> = None;
    for &tau in &candidates {
        while mi < m.len() && m[mi] < tau {
            mi += 1;
        }
        while ni < n.len() && n[ni] < tau {
            ni += 1;
        }
        let acc = balanced_accuracy(m.len() - mi, m.len(), ni, n.len());
        if best.is_none_or(|b| acc > b.balanced_accuracy) {
            best = Some(Calibration {
                threshold: tau,
                balanced_accuracy: acc,
            });
        }
    }
    Ok(best.expect("candidate set is never empty"))
}

/// Fits the threshold rule of the confidence attack on shadow records.
pub fn calibrate_threshold(
    members: &[ConfidenceRecord],
    nonmembers: &[ConfidenceRecord],
    mode: ThresholdMode,
) -> Result<ThresholdRule, AttackError> {
    let scores = |records: &[ConfidenceRecord], class: Option<usize>| -> Vec<f64> {
        records
            .iter()
            .filter(|r| class.is_none_or(|c| r.true_label == c))
            .map(ConfidenceRecord::true_confidence)
            .collect()
    };
    match mode {
        ThresholdMode::Global => {
            let cal = calibrate_scores(&scores(members, None), &scores(nonmembers, None))?;
            Ok(ThresholdRule::Global(cal.threshold))
        }
        ThresholdMode::PerClass => {
            let classes = members
                .iter()
                .chain(nonmembers)
                .map(|r| r.probabilities.len())
                .max()
                .ok_or_else(|| AttackError::Calibration("no calibration records".into()))?;
            let mut taus = Vec::with_capacity(classes);
            for c in 0..classes {
                let (ms, ns) = (scores(members, Some(c)), scores(nonmembers, Some(c)));
                if ms.is_empty() || ns.is_empty() {
                    return Err(AttackError::Calibration(format!(
                        "class {c} has {} member and {} non-member calibration records",
                        ms.len(),
                        ns.len()
                    )));
                }
                taus.push(calibrate_scores(&ms, &ns)?.threshold);
            }
            Ok(ThresholdRule::PerClass(taus))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(p_true: f64) -> ConfidenceRecord {
        ConfidenceRecord::new(vec![p_true, 1.0 - p_true], 0).unwrap()
    }

    #[test]
    fn threshold_attack_is_inclusive() {
        let rule = ThresholdRule::Global(0.8);
        assert!(threshold_attack(&record(0.9), &rule).unwrap());
        assert!(threshold_attack(&record(0.8), &rule).unwrap());
        assert!(!threshold_attack(&record(0.3), &rule).unwrap());
        let per_class = ThresholdRule::PerClass(vec![0.5]);
        let other = ConfidenceRecord::new(vec![0.5, 0.5], 1).unwrap();
        assert!(threshold_attack(&other, &per_class).is_err());
    }

    #[test]
    fn separable_calibration() {
        let m: Vec<_> = (0..5).map(|_| record(0.9)).collect();
        let n: Vec<_> = (0..5).map(|_| record(0.1)).collect();
        let ThresholdRule::Global(tau) =
            calibrate_threshold(&m, &n, ThresholdMode::Global).unwrap()
        else {
            panic!("global rule expected")
        };
        assert!(tau > 0.1 && tau <= 0.9);
        let cal = calibrate_scores(&[0.9; 5], &[0.1; 5]).unwrap();
        assert_eq!(cal.balanced_accuracy, 1.0);
        // Smallest maximizing candidate.
        assert_eq!(cal.threshold, 0.9);
    }

    #[test]
    fn per_class_requires_every_class() {
        let m = vec![record(0.9)];
        let n = vec![record(0.2)];
        assert!(matches!(
            calibrate_threshold(&m, &n, ThresholdMode::PerClass),
            Err(AttackError::Calibration(_))
        ));
        let m = vec![
            record(0.9),
            ConfidenceRecord::new(vec![0.1, 0.9], 1).unwrap(),
        ];
        let n = vec![
            record(0.2),
            ConfidenceRecord::new(vec![0.6, 0.4], 1).unwrap(),
        ];
        let rule = calibrate_threshold(&m, &n, ThresholdMode::PerClass).unwrap();
        assert_eq!(rule, ThresholdRule::PerClass(vec![0.9, 0.9]));
    }

    #[test]
    fn empty_inputs_fail() {
        assert!(calibrate_scores(&[], &[0.1]).is_err());
        assert!(calibrate_scores(&[0.1], &[]).is_err());
    }
}
