use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::attack::{AttackKind, LabelOnlyConfig, ThresholdMode};
use crate::data::{load_mnist_idx, make_blobs, read_csv, BlobSpec, Dataset, SplitSizes};
use crate::defense::DefenseConfig;

/// Where an experiment's examples come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Blobs(BlobSpec),
    /// An MNIST IDX pair, optionally followed by a second pair (typically
    /// the official test files) appended to the same pool.
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        extra_images: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        extra_labels: Option<PathBuf>,
    },
    Csv {
        path: PathBuf,
    },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Blobs(default_blobs())
    }
}

/// Ten overlapping Gaussian classes in 320 dimensions. With 1000 training
/// points the default MLP fits its training set almost perfectly while test
/// accuracy stays near 55%, which is the gap membership attacks exploit.
pub fn default_blobs() -> BlobSpec {
    BlobSpec {
        num_classes: 10,
        points_per_class: 500,
        dimension: 320,
        separation: 3.75,
        spread: 1.0,
        seed: 2024,
    }
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset, HarnessError> {
        Ok(match self {
            DatasetSource::Blobs(spec) => make_blobs(spec)?,
            DatasetSource::Mnist {
                images,
                labels,
                extra_images,
                extra_labels,
            } => {
                let base = load_mnist_idx(images, labels)?;
                match (extra_images, extra_labels) {
                    (Some(ei), Some(el)) => base.concat(&load_mnist_idx(ei, el)?)?,
                    (None, None) => base,
                    _ => {
                        return Err(HarnessError::Config(
                            "extra_images and extra_labels must be given together".into(),
                        ))
                    }
                }
            }
            DatasetSource::Csv { path } => read_csv(path)?,
        })
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub split: SplitSizes,
    /// Hidden layer widths; input and output sizes come from the dataset.
    pub hidden_layers: Vec<usize>,
    pub defense: DefenseConfig,
    pub attacks: Vec<AttackKind>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub repeats: usize,
    pub seed: u64,
    pub label_only: LabelOnlyConfig,
    pub threshold_mode: ThresholdMode,
    /// Train the shadow model with the target's defense (the stronger
    /// adversary) rather than without any defense.
    pub shadow_uses_defense: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::default(),
            split: SplitSizes::default(),
            hidden_layers: vec![256, 128],
            defense: DefenseConfig::None,
            attacks: AttackKind::ALL.to_vec(),
            epochs: 100,
            batch_size: 128,
            learning_rate: 1e-3,
            repeats: 5,
            seed: 0,
            label_only: LabelOnlyConfig::default(),
            threshold_mode: ThresholdMode::Global,
            shadow_uses_defense: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: &str| Err(HarnessError::Config(msg.into()));
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.hidden_layers.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        if self.split.target_train == 0 || self.split.target_test == 0 {
            return bad("target_train and target_test must be non-empty");
        }
        let mut attacks = self.attacks.clone();
        attacks.sort();
        attacks.dedup();
        if attacks.len() != self.attacks.len() {
            return bad("attacks must not repeat");
        }
        if !self.attacks.is_empty() {
            if self.split.shadow_train == 0 || self.split.shadow_test == 0 {
                return bad("attacks need non-empty shadow_train and shadow_test splits");
            }
            if self.split.attack_eval == 0 {
                return bad("attacks need attack_eval > 0");
            }
        }
        self.defense.validate()?;
        self.label_only.validate()?;
        Ok(())
    }

    /// Full layer sizes for a dataset.
    pub fn layer_sizes(&self, dataset: &Dataset) -> Vec<usize> {
        std::iter::once(dataset.dim())
            .chain(self.hidden_layers.iter().copied())
            .chain(std::iter::once(dataset.num_classes()))
            .collect()
    }

    pub fn settings(&self) -> super::TrainSettings {
        super::TrainSettings {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
        }
    }
}

/// Several experiments over the same dataset that differ in their defense.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComparisonConfig {
    Sweep {
        base: ExperimentConfig,
        defenses: Vec<DefenseConfig>,
    },
    List(Vec<ExperimentConfig>),
}

impl ComparisonConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn into_configs(self) -> Vec<ExperimentConfig> {
        match self {
            ComparisonConfig::Sweep { base, defenses } => defenses
                .into_iter()
                .map(|defense| ExperimentConfig {
                    defense,
                    ..base.clone()
                })
                .collect(),
            ComparisonConfig::List(configs) => configs,
        }
    }
}
