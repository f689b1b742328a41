use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{
    Aggregate, AttackAggregate, ComparisonRow, ComparisonTable, ExperimentReport, RepeatResult,
};
use super::{accuracy, train_model, ExperimentConfig, HarnessError};
use crate::attack::{
    calibrate_scores, calibrate_threshold, collect_confidences, evaluate_attack, label_consistency,
    label_only_attack, threshold_attack, train_attack_classifier, AttackKind, AttackReport,
};
use crate::data::{make_split, Dataset, SplitPlan};
use crate::defense::DefenseConfig;
use crate::numerics::MlpModel;
use crate::seed;

/// Index sets used by one repeat.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepeatPlan {
    pub repeat: usize,
    pub seed: u64,
    pub split: SplitPlan,
    /// Balanced shadow subsets the attacks are calibrated on.
    pub calibration_members: Vec<usize>,
    pub calibration_nonmembers: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Target,
    Shadow,
}

impl Role {
    fn tag(self) -> &'static str {
        match self {
            Role::Target => "target",
            Role::Shadow => "shadow",
        }
    }
}

/// Seed of repeat `repeat`; independent of how many repeats are run.
pub fn repeat_seed(master: u64, repeat: usize) -> u64 {
    seed::derive_indexed(master, "repeat", repeat as u64)
}

pub fn plan_repeat(
    config: &ExperimentConfig,
    dataset: &Dataset,
    repeat: usize,
) -> Result<RepeatPlan, HarnessError> {
    let seed = repeat_seed(config.seed, repeat);
    let split = make_split(dataset.len(), &config.split, seed::derive(seed, "split"))?;
    let per_side = config
        .split
        .attack_eval
        .min(split.shadow_train.len())
        .min(split.shadow_test.len());
    let mut rng = seed::stream(seed, "shadow-calibration");
    let calibration_members = crate::data::sample_indices(&split.shadow_train, per_side, &mut rng);
    let calibration_nonmembers =
        crate::data::sample_indices(&split.shadow_test, per_side, &mut rng);
    Ok(RepeatPlan {
        repeat,
        seed,
        split,
        calibration_members,
        calibration_nonmembers,
    })
}

/// Trains the target or shadow model of one repeat.
pub fn train_role(
    config: &ExperimentConfig,
    dataset: &Dataset,
    plan: &RepeatPlan,
    role: Role,
) -> Result<MlpModel, HarnessError> {
    let (indices, defense) = match role {
        Role::Target => (&plan.split.target_train, config.defense.clone()),
        Role::Shadow if config.shadow_uses_defense => {
            (&plan.split.shadow_train, config.defense.clone())
        }
        Role::Shadow => (&plan.split.shadow_train, DefenseConfig::None),
    };
    let (x, y) = dataset.select(indices);
    let trained = train_model(
        &x,
        &y,
        &config.layer_sizes(dataset),
        &defense,
        config.settings(),
        seed::derive(plan.seed, role.tag()),
    )?;
    Ok(trained.model)
}

/// Calibrates every configured attack on the shadow model and evaluates it
/// on the target's balanced member/non-member set.
pub fn run_attacks(
    config: &ExperimentConfig,
    dataset: &Dataset,
    plan: &RepeatPlan,
    target: &MlpModel,
    shadow: &MlpModel,
) -> Result<Vec<AttackReport>, HarnessError> {
    let split = &plan.split;
    let eval: Vec<usize> = split
        .attack_eval_members
        .iter()
        .chain(&split.attack_eval_nonmembers)
        .copied()
        .collect();
    let truth: Vec<bool> = (0..eval.len())
        .map(|i| i < split.attack_eval_members.len())
        .collect();

    let needs_confidences = config
        .attacks
        .iter()
        .any(|a| matches!(a, AttackKind::A1 | AttackKind::A2));
    let (cal_in, cal_out, target_records) = if needs_confidences {
        (
            collect_confidences(shadow, dataset, &plan.calibration_members)?,
            collect_confidences(shadow, dataset, &plan.calibration_nonmembers)?,
            collect_confidences(target, dataset, &eval)?,
        )
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };

    let mut reports = Vec::with_capacity(config.attacks.len());
    for &attack in &config.attacks {
        let predictions = match attack {
            AttackKind::A1 => {
                let mut rng = seed::stream(plan.seed, "a1-classifier");
                let clf = train_attack_classifier(&cal_in, &cal_out, &mut rng)?;
                target_records.iter().map(|r| clf.predict(r)).collect()
            }
            AttackKind::A2 => {
                let rule = calibrate_threshold(&cal_in, &cal_out, config.threshold_mode)?;
                target_records
                    .iter()
                    .map(|r| threshold_attack(r, &rule))
                    .collect::<Result<Vec<_>, _>>()?
            }
            AttackKind::A3 => {
                let scores = |model: &MlpModel, idx: &[usize], tag: &str| {
                    let mut rng = seed::stream(plan.seed, tag);
                    idx.iter()
                        .map(|&i| {
                            label_consistency(
                                model,
                                dataset.features().row(i),
                                dataset.labels()[i],
                                &config.label_only,
                                &mut rng,
                            )
                        })
                        .collect::<Result<Vec<f64>, _>>()
                };
                let cal = calibrate_scores(
                    &scores(shadow, &plan.calibration_members, "a3-shadow-members")?,
                    &scores(shadow, &plan.calibration_nonmembers, "a3-shadow-nonmembers")?,
                )?;
                scores(target, &eval, "a3-target")?
                    .into_iter()
                    .map(|p| label_only_attack(p, cal.threshold))
                    .collect()
            }
        };
        reports.push(evaluate_attack(attack, &predictions, &truth)?);
    }
    Ok(reports)
}

fn run_repeat(
    config: &ExperimentConfig,
    dataset: &Dataset,
    repeat: usize,
) -> Result<RepeatResult, HarnessError> {
    let ctx = |stage: &'static str| move |e: HarnessError| e.in_stage(repeat, stage);
    let plan = plan_repeat(config, dataset, repeat).map_err(ctx("split"))?;
    let target = train_role(config, dataset, &plan, Role::Target).map_err(ctx("train-target"))?;
    let (test_x, test_y) = dataset.select(&plan.split.target_test);
    let (train_x, train_y) = dataset.select(&plan.split.target_train);
    let classification_accuracy = accuracy(&target, &test_x, &test_y).map_err(ctx("evaluate"))?;
    let train_accuracy = accuracy(&target, &train_x, &train_y).map_err(ctx("evaluate"))?;
    let attacks = if config.attacks.is_empty() {
        Vec::new()
    } else {
        let shadow =
            train_role(config, dataset, &plan, Role::Shadow).map_err(ctx("train-shadow"))?;
        run_attacks(config, dataset, &plan, &target, &shadow).map_err(ctx("attack"))?
    };
    Ok(RepeatResult {
        repeat,
        seed: plan.seed,
        classification_accuracy,
        train_accuracy,
        attacks,
    })
}

/// Runs every repeat of `config` and aggregates the results.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let dataset = config.dataset.load()?;
    run_experiment_on(config, &dataset)
}

/// [`run_experiment`] on an already loaded dataset.
pub fn run_experiment_on(
    config: &ExperimentConfig,
    dataset: &Dataset,
) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let repeats = (0..config.repeats)
        .map(|r| run_repeat(config, dataset, r))
        .collect::<Result<Vec<_>, _>>()?;
    let classification = Aggregate::from_values(
        &repeats
            .iter()
            .map(|r| r.classification_accuracy)
            .collect::<Vec<_>>(),
    );
    let attacks = config
        .attacks
        .iter()
        .map(|&attack| {
            let values: Vec<f64> = repeats
                .iter()
                .map(|r| {
                    r.attacks
                        .iter()
                        .find(|a| a.attack == attack)
                        .expect("every repeat runs every attack")
                        .accuracy
                })
                .collect();
            AttackAggregate {
                attack,
                accuracy: Aggregate::from_values(&values),
            }
        })
        .collect();
    Ok(ExperimentReport {
        dataset: dataset.name().to_string(),
        defense: config.defense.label(),
        config: config.clone(),
        repeats,
        classification,
        attacks,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Runs configs that share a dataset and returns one row per config, in
/// input order.
pub fn run_comparison(
    configs: &[ExperimentConfig],
) -> Result<(ComparisonTable, Vec<ExperimentReport>), HarnessError> {
    let first = configs
        .first()
        .ok_or_else(|| HarnessError::Config("comparison needs at least one config".into()))?;
    if let Some(i) = configs.iter().position(|c| c.dataset != first.dataset) {
        return Err(HarnessError::Contract(format!(
            "config {i} uses a different dataset than config 0"
        )));
    }
    let dataset = first.dataset.load()?;
    let reports = configs
        .iter()
        .map(|c| run_experiment_on(c, &dataset))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((ComparisonTable::from_reports(&reports), reports))
}

impl ComparisonRow {
    pub(crate) fn from_report(report: &ExperimentReport) -> Self {
        ComparisonRow {
            defense: report.defense.clone(),
            classification: report.classification,
            attacks: report.attacks.clone(),
        }
    }
}
