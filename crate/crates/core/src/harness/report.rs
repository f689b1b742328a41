use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, HarnessError};
use crate::attack::{AttackKind, AttackReport};

/// Mean and sample standard deviation (n − 1 denominator) over repeats.
/// The deviation is absent for a single repeat.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: Option<f64>,
}

impl Aggregate {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() > 1)
            .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Aggregate { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackAggregate {
    pub attack: AttackKind,
    pub accuracy: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    /// Accuracy on the target's held-out test split.
    pub classification_accuracy: f64,
    /// Accuracy on the target's own training split.
    pub train_accuracy: f64,
    pub attacks: Vec<AttackReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub defense: String,
    pub config: ExperimentConfig,
    pub repeats: Vec<RepeatResult>,
    pub classification: Aggregate,
    pub attacks: Vec<AttackAggregate>,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn attack(&self, kind: AttackKind) -> Option<Aggregate> {
        self.attacks
            .iter()
            .find(|a| a.attack == kind)
            .map(|a| a.accuracy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub defense: String,
    pub classification: Aggregate,
    pub attacks: Vec<AttackAggregate>,
}

impl ComparisonRow {
    pub fn attack(&self, kind: AttackKind) -> Option<Aggregate> {
        self.attacks
            .iter()
            .find(|a| a.attack == kind)
            .map(|a| a.accuracy)
    }
}

/// Classification and attack accuracy per defense, one row per experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub dataset: String,
    /// Attack columns, in A1, A2, A3 order, covering every row's attacks.
    pub attacks: Vec<AttackKind>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn from_reports(reports: &[ExperimentReport]) -> Self {
        let mut attacks: Vec<AttackKind> = reports
            .iter()
            .flat_map(|r| r.attacks.iter().map(|a| a.attack))
            .collect();
        attacks.sort();
        attacks.dedup();
        ComparisonTable {
            dataset: reports
                .first()
                .map(|r| r.dataset.clone())
                .unwrap_or_default(),
            attacks,
            rows: reports.iter().map(ComparisonRow::from_report).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut header = vec![
            "defense".to_string(),
            "classification_mean".into(),
            "classification_std".into(),
        ];
        for a in &self.attacks {
            header.push(format!("{a}_mean"));
            header.push(format!("{a}_std"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header).expect("in-memory write");
        let fmt = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_default();
        for row in &self.rows {
            let mut record = vec![
                row.defense.clone(),
                fmt(Some(row.classification.mean)),
                fmt(row.classification.std),
            ];
            for &a in &self.attacks {
                let agg = row.attack(a);
                record.push(fmt(agg.map(|g| g.mean)));
                record.push(fmt(agg.and_then(|g| g.std)));
            }
            w.write_record(&record).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    /// Pipe table laid out like the classic defense comparison: metrics as
    /// row groups, defenses as columns, values in percent.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "| Metric | Dataset |");
        for row in &self.rows {
            let _ = write!(out, " {} |", row.defense.replace('|', "\\|"));
        }
        out.push('\n');
        out.push_str("|---|---|");
        out.push_str(&"---|".repeat(self.rows.len()));
        out.push('\n');
        let cell = |agg: Option<Aggregate>| match agg {
            Some(Aggregate { mean, std: Some(s) }) => {
                format!("{:.2} ± {:.2}", 100.0 * mean, 100.0 * s)
            }
            Some(Aggregate { mean, std: None }) => format!("{:.2}", 100.0 * mean),
            None => "n/a".into(),
        };
        let _ = write!(out, "| Classification Accuracy | {} |", self.dataset);
        for row in &self.rows {
            let _ = write!(out, " {} |", cell(Some(row.classification)));
        }
        out.push('\n');
        for &a in &self.attacks {
            let _ = write!(out, "| {a} Attack Accuracy | {} |", self.dataset);
            for row in &self.rows {
                let _ = write!(out, " {} |", cell(row.attack(a)));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
    Json,
}

impl ReportFormat {
    pub fn from_extension(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(ReportFormat::Csv),
            "md" | "markdown" => Some(ReportFormat::Markdown),
            "json" => Some(ReportFormat::Json),
            _ => None,
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            other => Err(HarnessError::Config(format!(
                "unknown report format `{other}` (expected csv, md or json)"
            ))),
        }
    }
}

/// Renders one or more experiment reports. CSV and Markdown show the
/// aggregated table; JSON carries every per-repeat detail.
pub fn render_reports(reports: &[ExperimentReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => ComparisonTable::from_reports(reports).to_csv(),
        ReportFormat::Markdown => ComparisonTable::from_reports(reports).to_markdown(),
        ReportFormat::Json => {
            let mut text = if let [single] = reports {
                serde_json::to_string_pretty(single)
            } else {
                serde_json::to_string_pretty(reports)
            }
            .expect("reports serialize");
            text.push('\n');
            text
        }
    }
}

pub fn emit_report(
    report: &ExperimentReport,
    format: ReportFormat,
    destination: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    emit_reports(std::slice::from_ref(report), format, destination)
}

pub fn emit_reports(
    reports: &[ExperimentReport],
    format: ReportFormat,
    destination: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    let path = destination.as_ref();
    std::fs::write(path, render_reports(reports, format)).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}
