use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::DefenseError;
use crate::numerics::Gradients;

/// Running sum of per-example gradients, each clipped to L2 norm `clip_norm`.
#[derive(Clone, Debug)]
pub struct ClippedSum {
    sum: Gradients,
    count: usize,
    clip_norm: f64,
    clipped: usize,
}

impl ClippedSum {
    pub fn new(template: &Gradients, clip_norm: f64) -> Result<Self, DefenseError> {
        if !(clip_norm > 0.0) || !clip_norm.is_finite() {
            return Err(DefenseError::Config(format!(
                "clip norm {clip_norm} must be positive"
            )));
        }
        let mut sum = template.clone();
        sum.scale(0.0);
        Ok(ClippedSum {
            sum,
            count: 0,
            clip_norm,
            clipped: 0,
        })
    }

    pub fn push(&mut self, grad: &Gradients) -> Result<(), DefenseError> {
        let norm = grad.l2_norm();
        let factor = if norm > self.clip_norm {
            self.clipped += 1;
            self.clip_norm / norm
        } else {
            1.0
        };
        self.sum.add_scaled(grad, factor)?;
        self.count += 1;
        Ok(())
    }

    /// Number of pushed gradients that exceeded the clip norm.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    /// Mean of the clipped gradients plus `N(0, (σ·C/n)²)` per coordinate.
    pub fn finish<R: Rng + ?Sized>(
        self,
        noise_multiplier: f64,
        rng: &mut R,
    ) -> Result<Gradients, DefenseError> {
        if !(noise_multiplier >= 0.0) || !noise_multiplier.is_finite() {
            return Err(DefenseError::Config(format!(
                "noise multiplier {noise_multiplier} must be non-negative"
            )));
        }
        if self.count == 0 {
            return Err(DefenseError::Contract("no per-example gradients".into()));
        }
        let n = self.count as f64;
        let mut mean = self.sum;
        mean.values_mut().for_each(|v| *v /= n);
        if noise_multiplier > 0.0 {
            let std = noise_multiplier * self.clip_norm / n;
            let normal = Normal::new(0.0, std).expect("positive std");
            mean.values_mut().for_each(|v| *v += normal.sample(rng));
        }
        Ok(mean)
    }
}

/// Clip each example's gradient to norm `clip_norm`, average, and add
/// Gaussian noise with standard deviation `noise_multiplier·clip_norm/n`.
pub fn clipped_noisy_gradient<R: Rng + ?Sized>(
    per_example: &[Gradients],
    clip_norm: f64,
    noise_multiplier: f64,
    rng: &mut R,
) -> Result<Gradients, DefenseError> {
    let first = per_example
        .first()
        .ok_or_else(|| DefenseError::Contract("no per-example gradients".into()))?;
    let mut acc = ClippedSum::new(first, clip_norm)?;
    for g in per_example {
        acc.push(g)?;
    }
    acc.finish(noise_multiplier, rng)
}
