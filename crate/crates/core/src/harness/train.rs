use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::defense::{
    adamixup_batch, lambda_at, standard_mixup_batch, ClippedSum, DefenseConfig, LambdaSchedule,
    MixedLabels,
};
use crate::numerics::{
    adam_step, add_regularization_gradient, one_hot, softmax_cross_entropy, AdamState, Matrix,
    MlpModel, NumericsError,
};
use crate::seed::{self, Rng};

/// Rows per per-example-gradient pass in clip-and-noise training; bounds the
/// memory held by per-example gradients.
const PER_EXAMPLE_CHUNK: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

/// Mini-batch Adam training of one model under one defense.
///
/// Each subsystem draws from its own stream derived from the seed: weight
/// init, batch shuffling, dropout masks, mixup pairing and gradient noise.
pub struct Trainer {
    model: MlpModel,
    adam: AdamState,
    defense: DefenseConfig,
    settings: TrainSettings,
    schedule: Option<LambdaSchedule>,
    num_classes: usize,
    shuffle_rng: Rng,
    dropout_rng: Rng,
    mixup_rng: Rng,
    noise_rng: Rng,
    epochs_run: usize,
}

impl Trainer {
    pub fn new(
        layer_sizes: &[usize],
        defense: &DefenseConfig,
        settings: TrainSettings,
        seed: u64,
    ) -> Result<Self, HarnessError> {
        defense.validate()?;
        if settings.epochs == 0 || settings.batch_size == 0 || !(settings.learning_rate > 0.0) {
            return Err(HarnessError::Config(format!(
                "invalid training settings {settings:?}"
            )));
        }
        let model = MlpModel::new(
            layer_sizes,
            defense.dropout_rate(),
            &mut seed::stream(seed, "init"),
        )?;
        let schedule = defense.lambda_schedule(settings.epochs).transpose()?;
        Ok(Trainer {
            adam: AdamState::new(&model),
            num_classes: model.num_classes(),
            model,
            defense: defense.clone(),
            settings,
            schedule,
            shuffle_rng: seed::stream(seed, "shuffle"),
            dropout_rng: seed::stream(seed, "dropout"),
            mixup_rng: seed::stream(seed, "mixup"),
            noise_rng: seed::stream(seed, "dp-noise"),
            epochs_run: 0,
        })
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn into_model(self) -> MlpModel {
        self.model
    }

    pub fn epochs_run(&self) -> usize {
        self.epochs_run
    }

    /// Mixing coefficient used for `epoch`, if the defense mixes with a schedule.
    pub fn lambda_for_epoch(&self, epoch: usize) -> Result<Option<f64>, HarnessError> {
        self.schedule
            .as_ref()
            .map(|s| lambda_at(epoch as f64, s))
            .transpose()
            .map_err(Into::into)
    }

    /// One pass over the training rows; returns the mean training loss.
    pub fn run_epoch(&mut self, features: &Matrix, labels: &[usize]) -> Result<f64, HarnessError> {
        if features.rows() != labels.len() || labels.is_empty() {
            return Err(HarnessError::Config(format!(
                "training set has {} rows and {} labels",
                features.rows(),
                labels.len()
            )));
        }
        let epoch = self.epochs_run;
        if epoch >= self.settings.epochs {
            return Err(HarnessError::Config(format!(
                "all {} epochs already run",
                self.settings.epochs
            )));
        }
        let lambda = self.lambda_for_epoch(epoch)?;
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(&mut self.shuffle_rng);

        let mut total_loss = 0.0;
        for batch in order.chunks(self.settings.batch_size) {
            let x = features.select_rows(batch);
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            total_loss += self.step(x, &y, lambda)? * batch.len() as f64;
        }
        if !self.model.is_finite() {
            return Err(NumericsError::NonFinite("training").into());
        }
        self.epochs_run += 1;
        Ok(total_loss / labels.len() as f64)
    }

    fn step(&mut self, x: Matrix, y: &[usize], lambda: Option<f64>) -> Result<f64, HarnessError> {
        let (x, targets) = match (&self.defense, lambda) {
            (DefenseConfig::AdaMixup { .. }, Some(lambda)) => {
                let mixed = adamixup_batch(&x, y, lambda, &mut self.mixup_rng)?;
                let MixedLabels::Hard(labels) = mixed.labels else {
                    unreachable!("adaptive mixup emits hard labels")
                };
                (mixed.features, one_hot(&labels, self.num_classes)?)
            }
            (DefenseConfig::StandardMixup { alpha }, _) => {
                let mixed =
                    standard_mixup_batch(&x, y, self.num_classes, *alpha, &mut self.mixup_rng)?;
                let MixedLabels::Soft(soft) = mixed.labels else {
                    unreachable!("standard mixup emits soft labels")
                };
                (mixed.features, soft)
            }
            _ => {
                let targets = one_hot(y, self.num_classes)?;
                (x, targets)
            }
        };

        let (loss, mut grads) = match self.defense {
            DefenseConfig::ClippedNoisy {
                clip_norm,
                noise_multiplier,
            } => self.clipped_noisy_gradients(&x, &targets, clip_norm, noise_multiplier)?,
            _ => {
                let (logits, trace) = self.model.forward(&x, true, &mut self.dropout_rng)?;
                let (loss, dlogits) = softmax_cross_entropy(&logits, &targets)?;
                (loss, self.model.backward(&trace, &dlogits)?)
            }
        };
        let (l1, l2) = self.defense.penalties();
        add_regularization_gradient(&mut grads, &self.model, l1, l2)?;
        adam_step(
            &mut self.model,
            &grads,
            &mut self.adam,
            self.settings.learning_rate,
        )?;
        Ok(loss)
    }

    fn clipped_noisy_gradients(
        &mut self,
        x: &Matrix,
        targets: &Matrix,
        clip_norm: f64,
        noise_multiplier: f64,
    ) -> Result<(f64, crate::numerics::Gradients), HarnessError> {
        let mut acc: Option<ClippedSum> = None;
        let mut loss_sum = 0.0;
        let rows: Vec<usize> = (0..x.rows()).collect();
        for chunk in rows.chunks(PER_EXAMPLE_CHUNK) {
            let xc = x.select_rows(chunk);
            let tc = targets.select_rows(chunk);
            let (logits, trace) = self.model.forward(&xc, true, &mut self.dropout_rng)?;
            let (loss, mut dlogits) = softmax_cross_entropy(&logits, &tc)?;
            loss_sum += loss * chunk.len() as f64;
            // Undo the batch mean: each row becomes its own example's gradient.
            dlogits.scale(chunk.len() as f64);
            for g in self.model.backward_per_example(&trace, &dlogits)? {
                match acc.as_mut() {
                    Some(acc) => acc.push(&g)?,
                    None => {
                        let mut first = ClippedSum::new(&g, clip_norm)?;
                        first.push(&g)?;
                        acc = Some(first);
                    }
                }
            }
        }
        let acc = acc.expect("batch is non-empty");
        let grads = acc.finish(noise_multiplier, &mut self.noise_rng)?;
        Ok((loss_sum / x.rows() as f64, grads))
    }
}

/// A trained model with its per-epoch mean training loss.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub model: MlpModel,
    pub epoch_losses: Vec<f64>,
}

/// Trains a fresh model on `features`/`labels` for `settings.epochs` epochs.
pub fn train_model(
    features: &Matrix,
    labels: &[usize],
    layer_sizes: &[usize],
    defense: &DefenseConfig,
    settings: TrainSettings,
    seed: u64,
) -> Result<TrainedModel, HarnessError> {
    let mut trainer = Trainer::new(layer_sizes, defense, settings, seed)?;
    let mut epoch_losses = Vec::with_capacity(settings.epochs);
    for _ in 0..settings.epochs {
        epoch_losses.push(trainer.run_epoch(features, labels)?);
    }
    Ok(TrainedModel {
        model: trainer.into_model(),
        epoch_losses,
    })
}

/// Fraction of rows whose predicted class equals the label.
pub fn accuracy(
    model: &MlpModel,
    features: &Matrix,
    labels: &[usize],
) -> Result<f64, HarnessError> {
    let predictions = model.predict_classes(features)?;
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, y)| p == y)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Mean cross-entropy of the model on clean one-hot targets.
pub fn mean_loss(
    model: &MlpModel,
    features: &Matrix,
    labels: &[usize],
) -> Result<f64, HarnessError> {
    let logits = model.predict_logits(features)?;
    let targets = one_hot(labels, model.num_classes())?;
    Ok(softmax_cross_entropy(&logits, &targets)?.0)
}
