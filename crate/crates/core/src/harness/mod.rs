//! Experiment orchestration: split the data, train target and shadow models
//! under a defense, calibrate attacks on the shadow, evaluate them on the
//! target, and aggregate over repeats.

mod config;
mod report;
mod run;
mod train;

use std::path::PathBuf;

use crate::attack::AttackError;
use crate::data::DataError;
use crate::defense::DefenseError;
use crate::numerics::NumericsError;

pub use config::{default_blobs, ComparisonConfig, DatasetSource, ExperimentConfig};
pub use report::{
    emit_report, emit_reports, render_reports, Aggregate, AttackAggregate, ComparisonRow,
    ComparisonTable, ExperimentReport, RepeatResult, ReportFormat,
};
pub use run::{
    plan_repeat, repeat_seed, run_attacks, run_comparison, run_experiment, run_experiment_on,
    train_role, RepeatPlan, Role,
};
pub use train::{accuracy, mean_loss, train_model, TrainSettings, TrainedModel, Trainer};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Defense(#[from] DefenseError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("repeat {repeat}, stage {stage}: {source}")]
    Stage {
        repeat: usize,
        stage: &'static str,
        #[source]
        source: Box<HarnessError>,
    },
}

impl HarnessError {
    pub(crate) fn in_stage(self, repeat: usize, stage: &'static str) -> Self {
        HarnessError::Stage {
            repeat,
            stage,
            source: Box::new(self),
        }
    }
}
