use serde::{Deserialize, Serialize};

use super::DefenseError;

/// Linear decay of the mixing coefficient from `lambda_initial` at epoch 0
/// to `lambda_min` at epoch `total_epochs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchedule {
    pub lambda_initial: f64,
    pub lambda_min: f64,
    pub total_epochs: usize,
}

impl LambdaSchedule {
    pub fn new(
        lambda_initial: f64,
        lambda_min: f64,
        total_epochs: usize,
    ) -> Result<Self, DefenseError> {
        let schedule = LambdaSchedule {
            lambda_initial,
            lambda_min,
            total_epochs,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<(), DefenseError> {
        if !(0.0 <= self.lambda_min
            && self.lambda_min <= self.lambda_initial
            && self.lambda_initial <= 1.0)
        {
            return Err(DefenseError::Config(format!(
                "need 0 <= lambda_min ({}) <= lambda_initial ({}) <= 1",
                self.lambda_min, self.lambda_initial
            )));
        }
        if self.total_epochs == 0 {
            return Err(DefenseError::Config("total_epochs must be positive".into()));
        }
        Ok(())
    }
}

/// `λ_t = λ_initial·(1 − t/T) + λ_min·(t/T)`.
///
/// `t` may be fractional. With `lambda_min = 0` this is the plain linear
/// decay `λ_initial·(1 − t/T)`.
pub fn lambda_at(t: f64, schedule: &LambdaSchedule) -> Result<f64, DefenseError> {
    schedule.validate()?;
    let total = schedule.total_epochs as f64;
    if !(0.0..=total).contains(&t) {
        return Err(DefenseError::Contract(format!(
            "epoch {t} outside [0, {total}]"
        )));
    }
    let progress = t / total;
    Ok(schedule.lambda_initial * (1.0 - progress) + schedule.lambda_min * progress)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        let s = LambdaSchedule::new(1.0, 0.0, 100).unwrap();
        assert_eq!(lambda_at(0.0, &s).unwrap(), 1.0);
        assert_eq!(lambda_at(50.0, &s).unwrap(), 0.5);
        assert_eq!(lambda_at(100.0, &s).unwrap(), 0.0);
        let s = LambdaSchedule::new(1.0, 0.1, 50).unwrap();
        assert_eq!(lambda_at(50.0, &s).unwrap(), 0.1);
        assert_eq!(lambda_at(0.0, &s).unwrap(), 1.0);
    }

    #[test]
    fn out_of_range_epoch_and_bad_schedule() {
        let s = LambdaSchedule::new(1.0, 0.1, 10).unwrap();
        assert!(lambda_at(10.5, &s).is_err());
        assert!(lambda_at(-1.0, &s).is_err());
        assert!(LambdaSchedule::new(0.5, 0.6, 10).is_err());
        assert!(LambdaSchedule::new(1.1, 0.0, 10).is_err());
        assert!(LambdaSchedule::new(1.0, 0.0, 0).is_err());
    }

    #[test]
    fn non_increasing_and_affine() {
        let s = LambdaSchedule::new(0.9, 0.2, 37).unwrap();
        let values: Vec<f64> = (0..=37).map(|t| lambda_at(t as f64, &s).unwrap()).collect();
        for w in values.windows(2) {
            assert!(w[1] <= w[0]);
        }
        let step = values[1] - values[0];
        for w in values.windows(2) {
            assert!((w[1] - w[0] - step).abs() < 1e-14);
        }
    }
}
