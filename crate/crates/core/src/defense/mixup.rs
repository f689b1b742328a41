use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::DefenseError;
use crate::numerics::Matrix;

/// Labels attached to a mixed batch.
#[derive(Clone, Debug, PartialEq)]
pub enum MixedLabels {
    /// One class per row (adaptive mixup).
    Hard(Vec<usize>),
    /// One distribution per row (standard mixup).
    Soft(Matrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedBatch {
    pub features: Matrix,
    pub labels: MixedLabels,
    /// Coefficient of the row's own sample; the partner gets `1 − λ`.
    pub lambda: f64,
    /// `partners[i]` is the row that row `i` was mixed with.
    pub partners: Vec<usize>,
}

fn check_lambda(lambda: f64) -> Result<(), DefenseError> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(DefenseError::Contract(format!(
            "lambda {lambda} outside [0, 1]"
        )))
    }
}

/// `λ·x1 + (1 − λ)·x2`, elementwise.
///
/// Each coordinate is clamped to the interval spanned by the two inputs, so
/// rounding never pushes a result outside it.
pub fn mix_pair(x1: &[f64], x2: &[f64], lambda: f64) -> Result<Vec<f64>, DefenseError> {
    check_lambda(lambda)?;
    if x1.len() != x2.len() {
        return Err(DefenseError::Contract(format!(
            "cannot mix rows of length {} and {}",
            x1.len(),
            x2.len()
        )));
    }
    Ok(x1
        .iter()
        .zip(x2)
        .map(|(&a, &b)| mix_value(a, b, lambda))
        .collect())
}

fn mix_value(a: f64, b: f64, lambda: f64) -> f64 {
    (lambda * a + (1.0 - lambda) * b).clamp(a.min(b), a.max(b))
}

/// The dominant sample's label: `y1` when `λ ≥ 0.5`, otherwise `y2`.
pub fn adamix_label(y1: usize, y2: usize, lambda: f64) -> usize {
    if lambda >= 0.5 {
        y1
    } else {
        y2
    }
}

fn check_batch(features: &Matrix, labels: &[usize]) -> Result<(), DefenseError> {
    if features.rows() != labels.len() {
        return Err(DefenseError::Contract(format!(
            "{} rows but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(DefenseError::Contract("empty batch".into()));
    }
    Ok(())
}

fn mix_with_partners(features: &Matrix, partners: &[usize], lambda: f64) -> Matrix {
    let mut out = features.clone();
    for (i, &j) in partners.iter().enumerate() {
        let partner = features.row(j);
        out.row_mut(i)
            .iter_mut()
            .zip(partner)
            .for_each(|(a, &b)| *a = mix_value(*a, b, lambda));
    }
    out
}

fn random_partners<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Mixes every row with a randomly permuted partner using a shared `λ_t`
/// and labels each result with its dominant component.
pub fn adamixup_batch<R: Rng + ?Sized>(
    features: &Matrix,
    labels: &[usize],
    lambda: f64,
    rng: &mut R,
) -> Result<MixedBatch, DefenseError> {
    check_batch(features, labels)?;
    check_lambda(lambda)?;
    let partners = random_partners(labels.len(), rng);
    let mixed = mix_with_partners(features, &partners, lambda);
    let hard = partners
        .iter()
        .enumerate()
        .map(|(i, &j)| adamix_label(labels[i], labels[j], lambda))
        .collect();
    Ok(MixedBatch {
        features: mixed,
        labels: MixedLabels::Hard(hard),
        lambda,
        partners,
    })
}

/// Draws `λ ~ Beta(α, α)` as `G1 / (G1 + G2)` with `Gi ~ Gamma(α, 1)`.
pub fn sample_beta<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64, DefenseError> {
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|_| DefenseError::Config(format!("mixup alpha {alpha} must be positive")))?;
    let g1 = gamma.sample(rng);
    let g2 = gamma.sample(rng);
    let total = g1 + g2;
    // Both draws underflow to zero only for tiny alpha.
    Ok(if total > 0.0 { g1 / total } else { 0.5 })
}

/// Classic mixup: per-batch `λ ~ Beta(α, α)` and interpolated one-hot labels.
pub fn standard_mixup_batch<R: Rng + ?Sized>(
    features: &Matrix,
    labels: &[usize],
    num_classes: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<MixedBatch, DefenseError> {
    check_batch(features, labels)?;
    if !(alpha > 0.0) {
        return Err(DefenseError::Config(format!(
            "mixup alpha {alpha} must be positive"
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(DefenseError::Contract(format!(
            "label {bad} outside 0..{num_classes}"
        )));
    }
    let lambda = sample_beta(alpha, rng)?;
    let partners = random_partners(labels.len(), rng);
    let mixed = mix_with_partners(features, &partners, lambda);
    let mut soft = Matrix::zeros(labels.len(), num_classes);
    for (i, &j) in partners.iter().enumerate() {
        let (y1, y2) = (labels[i], labels[j]);
        if y1 == y2 {
            soft[(i, y1)] = 1.0;
        } else {
            soft[(i, y1)] = lambda;
            soft[(i, y2)] = 1.0 - lambda;
        }
    }
    Ok(MixedBatch {
        features: mixed,
        labels: MixedLabels::Soft(soft),
        lambda,
        partners,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::Rng as SeededRng;
    use rand::SeedableRng;

    fn batch() -> (Matrix, Vec<usize>) {
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| vec![i as f64 / 8.0, 1.0 - i as f64 / 8.0, 0.3])
            .collect();
        (
            Matrix::from_rows(&rows).unwrap(),
            vec![0, 1, 2, 3, 0, 1, 2, 3],
        )
    }

    #[test]
    fn mix_pair_examples() {
        let (a, b) = ([0.3, 0.7, 0.1], [0.9, 0.2, 0.1]);
        assert_eq!(mix_pair(&a, &b, 1.0).unwrap(), a);
        assert_eq!(mix_pair(&a, &b, 0.0).unwrap(), b);
        assert_eq!(mix_pair(&[0.0, 2.0], &[2.0, 0.0], 0.5).unwrap(), [1.0, 1.0]);
        assert!(mix_pair(&a, &b[..2], 0.5).is_err());
        assert!(mix_pair(&a, &b, 1.5).is_err());
    }

    #[test]
    fn adamix_label_branches() {
        assert_eq!(adamix_label(3, 8, 0.7), 3);
        assert_eq!(adamix_label(3, 8, 0.5), 3);
        assert_eq!(adamix_label(3, 8, 0.3), 8);
    }

    #[test]
    fn adamixup_identity_at_one() {
        let (x, y) = batch();
        let mixed = adamixup_batch(&x, &y, 1.0, &mut SeededRng::seed_from_u64(1)).unwrap();
        assert_eq!(mixed.features, x);
        assert_eq!(mixed.labels, MixedLabels::Hard(y));
    }

    #[test]
    fn adamixup_dominant_labels_and_determinism() {
        let (x, y) = batch();
        let mixed = adamixup_batch(&x, &y, 0.6, &mut SeededRng::seed_from_u64(2)).unwrap();
        assert_eq!(mixed.labels, MixedLabels::Hard(y.clone()));
        for (i, &j) in mixed.partners.iter().enumerate() {
            assert_eq!(
                mixed.features.row(i),
                mix_pair(x.row(i), x.row(j), 0.6).unwrap()
            );
        }
        let again = adamixup_batch(&x, &y, 0.6, &mut SeededRng::seed_from_u64(2)).unwrap();
        assert_eq!(mixed, again);

        let low = adamixup_batch(&x, &y, 0.2, &mut SeededRng::seed_from_u64(2)).unwrap();
        let MixedLabels::Hard(labels) = &low.labels else {
            panic!("hard labels expected")
        };
        for (i, &j) in low.partners.iter().enumerate() {
            assert_eq!(labels[i], y[j]);
        }
    }

    #[test]
    fn adamixup_rejects_empty_and_mismatched() {
        let (x, y) = batch();
        assert!(adamixup_batch(&x, &y[..3], 0.5, &mut SeededRng::seed_from_u64(0)).is_err());
        assert!(adamixup_batch(&x, &y, -0.1, &mut SeededRng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn beta_one_is_uniform() {
        let mut rng = SeededRng::seed_from_u64(7);
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_beta(1.0, &mut rng).unwrap())
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
        // Uniform variance is 1/12.
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0 / 12.0).abs() < 0.005, "{var}");
        assert!(sample_beta(0.0, &mut rng).is_err());
    }

    #[test]
    fn soft_labels_are_distributions() {
        let (x, y) = batch();
        for seed in 0..20 {
            let mixed =
                standard_mixup_batch(&x, &y, 4, 0.4, &mut SeededRng::seed_from_u64(seed)).unwrap();
            let MixedLabels::Soft(soft) = &mixed.labels else {
                panic!("soft labels expected")
            };
            for (i, row) in soft.row_iter().enumerate() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&p| p >= 0.0));
                let j = mixed.partners[i];
                if y[i] == y[j] {
                    let mut expected = vec![0.0; 4];
                    expected[y[i]] = 1.0;
                    assert_eq!(row, expected.as_slice());
                }
            }
        }
    }
}
