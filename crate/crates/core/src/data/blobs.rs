use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};
use crate::numerics::Matrix;
use crate::seed::Rng;

/// Isotropic Gaussian clusters, one per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpec {
    pub num_classes: usize,
    pub points_per_class: usize,
    pub dimension: usize,
    /// Distance between neighbouring class centers.
    pub separation: f64,
    /// Per-coordinate standard deviation around each center.
    pub spread: f64,
    pub seed: u64,
}

impl BlobSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.num_classes == 0 || self.points_per_class == 0 || self.dimension == 0 {
            return Err(DataError::Invalid(format!(
                "blob spec needs positive class count, points per class and dimension: {self:?}"
            )));
        }
        if !(self.separation > 0.0 && self.spread > 0.0)
            || !self.separation.is_finite()
            || !self.spread.is_finite()
        {
            return Err(DataError::Invalid(format!(
                "blob separation and spread must be positive and finite: {self:?}"
            )));
        }
        Ok(())
    }

    /// Class centers: simplex vertices when the dimension allows it (all
    /// pairs `separation` apart), otherwise evenly spaced on a circle (or a
    /// line in one dimension) with neighbours `separation` apart.
    pub fn centers(&self) -> Vec<Vec<f64>> {
        let (c, d, sep) = (self.num_classes, self.dimension, self.separation);
        (0..c)
            .map(|k| {
                let mut center = vec![0.0; d];
                if d >= c {
                    center[k] = sep / std::f64::consts::SQRT_2;
                } else if d >= 2 {
                    let radius = sep / (2.0 * (std::f64::consts::PI / c as f64).sin());
                    let angle = 2.0 * std::f64::consts::PI * k as f64 / c as f64;
                    center[0] = radius * angle.cos();
                    center[1] = radius * angle.sin();
                } else {
                    center[0] = sep * (k as f64 - (c - 1) as f64 / 2.0);
                }
                center
            })
            .collect()
    }
}

/// Generates the blob dataset, min-max normalized per feature to `[0, 1]`.
/// Rows are ordered class by class.
pub fn make_blobs(spec: &BlobSpec) -> Result<Dataset, DataError> {
    spec.validate()?;
    let mut rng = Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.spread).expect("validated spread");
    let n = spec.num_classes * spec.points_per_class;
    let mut values = Vec::with_capacity(n * spec.dimension);
    let mut labels = Vec::with_capacity(n);
    for (class, center) in spec.centers().iter().enumerate() {
        for _ in 0..spec.points_per_class {
            values.extend(center.iter().map(|c| c + noise.sample(&mut rng)));
            labels.push(class);
        }
    }
    let mut features = Matrix::from_vec(n, spec.dimension, values)?;
    min_max_normalize(&mut features);
    Dataset::new(
        features,
        labels,
        spec.num_classes,
        format!("blobs-{}c-{}d", spec.num_classes, spec.dimension),
    )
}

fn min_max_normalize(features: &mut Matrix) {
    let cols = features.cols();
    let mut lo = vec![f64::INFINITY; cols];
    let mut hi = vec![f64::NEG_INFINITY; cols];
    for row in features.row_iter() {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    for i in 0..features.rows() {
        for (j, v) in features.row_mut(i).iter_mut().enumerate() {
            let range = hi[j] - lo[j];
            *v = if range > 0.0 {
                (*v - lo[j]) / range
            } else {
                0.0
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(classes: usize, dim: usize, separation: f64, spread: f64) -> BlobSpec {
        BlobSpec {
            num_classes: classes,
            points_per_class: 100,
            dimension: dim,
            separation,
            spread,
            seed: 42,
        }
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn centers_are_equidistant_neighbours() {
        for (c, d) in [(4, 10), (5, 2), (3, 2), (2, 1), (10, 10)] {
            let s = spec(c, d, 3.0, 1.0);
            let centers = s.centers();
            for k in 0..c {
                let next = (k + 1) % c;
                if d == 1 && next == 0 {
                    continue;
                }
                assert!(
                    (dist(&centers[k], &centers[next]) - 3.0).abs() < 1e-12,
                    "{c} {d}"
                );
            }
        }
    }

    #[test]
    fn deterministic_and_normalized() {
        let s = spec(3, 4, 5.0, 1.0);
        let a = make_blobs(&s).unwrap();
        assert_eq!(a, make_blobs(&s).unwrap());
        assert_eq!(a.len(), 300);
        assert!(a
            .features()
            .as_slice()
            .iter()
            .all(|v| (0.0..=1.0).contains(v)));
        let other = make_blobs(&BlobSpec { seed: 43, ..s }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn invalid_specs() {
        assert!(make_blobs(&spec(2, 2, 0.0, 1.0)).is_err());
        assert!(make_blobs(&spec(2, 2, 1.0, -1.0)).is_err());
        assert!(make_blobs(&spec(0, 2, 1.0, 1.0)).is_err());
    }

    /// Accuracy of assigning each point to its nearest class mean.
    fn nearest_center_accuracy(d: &Dataset) -> f64 {
        let c = d.num_classes();
        let mut means = vec![vec![0.0; d.dim()]; c];
        let mut counts = vec![0.0; c];
        for (row, &y) in d.features().row_iter().zip(d.labels()) {
            means[y].iter_mut().zip(row).for_each(|(m, v)| *m += v);
            counts[y] += 1.0;
        }
        for (m, n) in means.iter_mut().zip(&counts) {
            m.iter_mut().for_each(|v| *v /= n);
        }
        let correct = d
            .features()
            .row_iter()
            .zip(d.labels())
            .filter(|(row, &y)| {
                let best = (0..c)
                    .min_by(|&a, &b| dist(row, &means[a]).total_cmp(&dist(row, &means[b])))
                    .unwrap();
                best == y
            })
            .count();
        correct as f64 / d.len() as f64
    }

    #[test]
    fn overlap_controls_separability() {
        let easy = make_blobs(&spec(2, 2, 10.0, 0.5)).unwrap();
        assert_eq!(nearest_center_accuracy(&easy), 1.0);
        let hard = make_blobs(&spec(2, 2, 0.01, 5.0)).unwrap();
        let acc = nearest_center_accuracy(&hard);
        // Sample means fitted in-sample can exploit noise a little.
        assert!((0.4..0.62).contains(&acc), "{acc}");
    }
}
