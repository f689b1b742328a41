use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mialab_core::attack::{AttackKind, AttackReport, ThresholdMode};
use mialab_core::data::{make_blobs, write_csv, BlobSpec};
use mialab_core::defense::DefenseConfig;
use mialab_core::harness::{
    accuracy, default_blobs, plan_repeat, render_reports, run_attacks, run_comparison,
    run_experiment, train_role, ComparisonConfig, DatasetSource, ExperimentConfig, ReportFormat,
    Role,
};
use mialab_core::numerics::{gradient_check, Matrix, MlpModel};
use mialab_core::seed;
use rand::Rng as _;

/// Membership-inference attacks and training-time defenses.
#[derive(Debug, Parser)]
#[command(name = "mialab", version)]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON experiment config (comparison configs are also accepted by `compare`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; defaults to standard output where that makes sense.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format; defaults to the --out extension, then csv.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Do not print the resolved config or progress.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a Gaussian blob dataset as CSV.
    GenData(BlobArgs),
    /// Train the target or shadow model of one repeat and save it as JSON.
    Train {
        #[arg(long, value_enum, default_value = "target")]
        role: RoleArg,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Calibrate attacks on a shadow model and evaluate them on a target.
    Attack {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        shadow: PathBuf,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run all repeats of one experiment and emit its report.
    Experiment {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run one experiment per defense on a shared dataset.
    Compare {
        /// Defense tags, comma separated; replaces the config's list.
        #[arg(long, value_delimiter = ',')]
        defenses: Vec<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check backpropagation against finite differences on a random model.
    Gradcheck,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Md,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RoleArg {
    Target,
    Shadow,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ThresholdArg {
    Global,
    PerClass,
}

#[derive(Debug, Args)]
struct BlobArgs {
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    dimension: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    spread: Option<f64>,
}

/// Inline settings that win over the config file.
#[derive(Debug, Args)]
struct Overrides {
    /// Defense tag (none, dropout, l1, l2, mixup, adamixup, dpsgd) with default hyperparameters.
    #[arg(long)]
    defense: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Attacks to run, comma separated (A1,A2,A3).
    #[arg(long, value_delimiter = ',')]
    attacks: Option<Vec<AttackKind>>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    threshold_mode: Option<ThresholdArg>,
    /// Train shadow models without the target's defense.
    #[arg(long)]
    undefended_shadow: bool,
    /// Labelled CSV dataset (label,f0,f1,...).
    #[arg(long, conflicts_with = "mnist_dir")]
    data_csv: Option<PathBuf>,
    /// Directory holding the four MNIST IDX files; train and test are pooled.
    #[arg(long)]
    mnist_dir: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, config: &mut ExperimentConfig) -> Result<()> {
        if let Some(tag) = &self.defense {
            config.defense = DefenseConfig::from_tag(tag)?;
        }
        if let Some(v) = self.epochs {
            config.epochs = v;
        }
        if let Some(v) = self.batch_size {
            config.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            config.learning_rate = v;
        }
        if let Some(v) = self.repeats {
            config.repeats = v;
        }
        if let Some(v) = &self.attacks {
            config.attacks = v.clone();
        }
        if let Some(v) = &self.hidden {
            config.hidden_layers = v.clone();
        }
        if let Some(mode) = self.threshold_mode {
            config.threshold_mode = match mode {
                ThresholdArg::Global => ThresholdMode::Global,
                ThresholdArg::PerClass => ThresholdMode::PerClass,
            };
        }
        if self.undefended_shadow {
            config.shadow_uses_defense = false;
        }
        if let Some(path) = &self.data_csv {
            config.dataset = DatasetSource::Csv { path: path.clone() };
        }
        if let Some(dir) = &self.mnist_dir {
            config.dataset = DatasetSource::Mnist {
                images: dir.join("train-images-idx3-ubyte"),
                labels: dir.join("train-labels-idx1-ubyte"),
                extra_images: Some(dir.join("t10k-images-idx3-ubyte")),
                extra_labels: Some(dir.join("t10k-labels-idx1-ubyte")),
            };
        }
        Ok(())
    }
}

/// Bad invocation detected after parsing; exits like a clap usage error.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            eprintln!("\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::from(2)
        }
    }
}

/// The error chain on one line. Library errors already embed their cause,
/// so links repeated by the previous message are skipped.
fn one_line(error: &anyhow::Error) -> String {
    let mut message = String::new();
    for link in error.chain() {
        let text = link.to_string();
        if !message.ends_with(&text) {
            if !message.is_empty() {
                message.push_str(": ");
            }
            message.push_str(&text);
        }
    }
    message.replace('\n', " ")
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(blobs) => gen_data(cli, blobs),
        Command::Train {
            role,
            repeat,
            overrides,
        } => train(cli, *role, *repeat, overrides),
        Command::Attack {
            target,
            shadow,
            repeat,
            overrides,
        } => attack(cli, target, shadow, *repeat, overrides),
        Command::Experiment { overrides } => experiment(cli, overrides),
        Command::Compare {
            defenses,
            overrides,
        } => compare(cli, defenses, overrides),
        Command::Gradcheck => gradcheck(cli),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    match &cli.config {
        Some(path) => Ok(ExperimentConfig::from_file(path)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn resolve_config(cli: &Cli, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut config = load_config(cli)?;
    overrides.apply(&mut config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    if !cli.quiet {
        eprintln!("{}", config.to_json_pretty());
    }
    Ok(config)
}

fn report_format(cli: &Cli) -> ReportFormat {
    match cli.format {
        Some(FormatArg::Csv) => ReportFormat::Csv,
        Some(FormatArg::Md) => ReportFormat::Markdown,
        Some(FormatArg::Json) => ReportFormat::Json,
        None => cli
            .out
            .as_deref()
            .and_then(ReportFormat::from_extension)
            .unwrap_or(ReportFormat::Csv),
    }
}

fn required_out(cli: &Cli) -> Result<&Path> {
    match &cli.out {
        Some(path) => Ok(path),
        None => Err(UsageError(format!(
            "the '{}' command needs --out <PATH>",
            subcommand_name(&cli.command)
        ))
        .into()),
    }
}

fn subcommand_name(command: &Command) -> &'static str {
    match command {
        Command::GenData(_) => "gen-data",
        Command::Train { .. } => "train",
        Command::Attack { .. } => "attack",
        Command::Experiment { .. } => "experiment",
        Command::Compare { .. } => "compare",
        Command::Gradcheck => "gradcheck",
    }
}

/// Writes `text` to --out, or to standard output without one.
fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            if !cli.quiet {
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn gen_data(cli: &Cli, args: &BlobArgs) -> Result<()> {
    let mut spec = match &cli.config {
        Some(_) => match load_config(cli)?.dataset {
            DatasetSource::Blobs(spec) => spec,
            _ => bail!("gen-data needs a config whose dataset is blobs"),
        },
        None => default_blobs(),
    };
    let BlobArgs {
        classes,
        per_class,
        dimension,
        separation,
        spread,
    } = *args;
    spec = BlobSpec {
        num_classes: classes.unwrap_or(spec.num_classes),
        points_per_class: per_class.unwrap_or(spec.points_per_class),
        dimension: dimension.unwrap_or(spec.dimension),
        separation: separation.unwrap_or(spec.separation),
        spread: spread.unwrap_or(spec.spread),
        seed: cli.seed.unwrap_or(spec.seed),
    };
    let out = required_out(cli)?;
    if !cli.quiet {
        eprintln!("{}", serde_json::to_string_pretty(&spec)?);
    }
    let dataset = make_blobs(&spec)?;
    write_csv(&dataset, out)?;
    if !cli.quiet {
        eprintln!("wrote {} rows to {}", dataset.len(), out.display());
    }
    Ok(())
}

fn train(cli: &Cli, role: RoleArg, repeat: usize, overrides: &Overrides) -> Result<()> {
    let out = required_out(cli)?;
    let config = resolve_config(cli, overrides)?;
    let dataset = config.dataset.load()?;
    let plan = plan_repeat(&config, &dataset, repeat)?;
    let role = match role {
        RoleArg::Target => Role::Target,
        RoleArg::Shadow => Role::Shadow,
    };
    let model = train_role(&config, &dataset, &plan, role)?;
    if !cli.quiet {
        let (train_idx, test_idx) = match role {
            Role::Target => (&plan.split.target_train, &plan.split.target_test),
            Role::Shadow => (&plan.split.shadow_train, &plan.split.shadow_test),
        };
        let (x, y) = dataset.select(train_idx);
        let train_acc = accuracy(&model, &x, &y)?;
        let (x, y) = dataset.select(test_idx);
        let test_acc = accuracy(&model, &x, &y)?;
        eprintln!("train accuracy {train_acc:.4}, test accuracy {test_acc:.4}");
    }
    let json = serde_json::to_string(&model)?;
    std::fs::write(out, json).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn load_model(path: &Path) -> Result<MlpModel> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing model {}", path.display()))
}

fn attack(
    cli: &Cli,
    target: &Path,
    shadow: &Path,
    repeat: usize,
    overrides: &Overrides,
) -> Result<()> {
    let config = resolve_config(cli, overrides)?;
    let target = load_model(target)?;
    let shadow = load_model(shadow)?;
    let dataset = config.dataset.load()?;
    let expected = config.layer_sizes(&dataset);
    for (name, model) in [("target", &target), ("shadow", &shadow)] {
        if model.layer_sizes() != expected.as_slice() {
            bail!(
                "{name} model has layers {:?}, config expects {:?}",
                model.layer_sizes(),
                expected
            );
        }
    }
    let plan = plan_repeat(&config, &dataset, repeat)?;
    let reports = run_attacks(&config, &dataset, &plan, &target, &shadow)?;
    emit(cli, &render_attack_reports(&reports, report_format(cli))?)
}

fn render_attack_reports(reports: &[AttackReport], format: ReportFormat) -> Result<String> {
    let mut out = String::new();
    match format {
        ReportFormat::Json => {
            out = serde_json::to_string_pretty(reports)?;
            out.push('\n');
        }
        ReportFormat::Csv => {
            out.push_str("attack,accuracy,true_positive_rate,false_positive_rate,tp,fp,tn,fn\n");
            for r in reports {
                writeln!(
                    out,
                    "{},{:.4},{:.4},{:.4},{},{},{},{}",
                    r.attack,
                    r.accuracy,
                    r.true_positive_rate,
                    r.false_positive_rate,
                    r.true_positives,
                    r.false_positives,
                    r.true_negatives,
                    r.false_negatives
                )?;
            }
        }
        ReportFormat::Markdown => {
            out.push_str("| Attack | Accuracy | TPR | FPR |\n|---|---|---|---|\n");
            for r in reports {
                writeln!(
                    out,
                    "| {} | {:.2} | {:.2} | {:.2} |",
                    r.attack,
                    100.0 * r.accuracy,
                    100.0 * r.true_positive_rate,
                    100.0 * r.false_positive_rate
                )?;
            }
        }
    }
    Ok(out)
}

fn experiment(cli: &Cli, overrides: &Overrides) -> Result<()> {
    let config = resolve_config(cli, overrides)?;
    let report = run_experiment(&config)?;
    if !cli.quiet {
        eprintln!(
            "{} repeats in {:.1}s",
            report.repeats.len(),
            report.wall_clock_seconds
        );
    }
    emit(
        cli,
        &render_reports(std::slice::from_ref(&report), report_format(cli)),
    )
}

fn compare(cli: &Cli, defenses: &[String], overrides: &Overrides) -> Result<()> {
    if overrides.defense.is_some() {
        return Err(UsageError("compare takes --defenses, not --defense".into()).into());
    }
    let mut configs = match &cli.config {
        Some(path) => match ComparisonConfig::from_file(path) {
            Ok(comparison) => comparison.into_configs(),
            Err(_) => vec![ExperimentConfig::from_file(path)?],
        },
        None => vec![ExperimentConfig::default()],
    };
    let tags: Vec<&str> = if !defenses.is_empty() {
        defenses.iter().map(String::as_str).collect()
    } else if configs.len() == 1 && cli.config.is_none() {
        DefenseConfig::TAGS.to_vec()
    } else {
        Vec::new()
    };
    if !tags.is_empty() {
        let base = configs[0].clone();
        configs = tags
            .iter()
            .map(|tag| {
                Ok(ExperimentConfig {
                    defense: DefenseConfig::from_tag(tag)?,
                    ..base.clone()
                })
            })
            .collect::<Result<_>>()?;
    }
    for config in &mut configs {
        overrides.apply(config)?;
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        config.validate()?;
    }
    if !cli.quiet {
        eprintln!("{}", serde_json::to_string_pretty(&configs)?);
    }
    let (_, reports) = run_comparison(&configs)?;
    emit(cli, &render_reports(&reports, report_format(cli)))
}

fn gradcheck(cli: &Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let mut rng = seed::stream(seed, "gradcheck");
    let sizes = [6, 10, 8, 4];
    let init = MlpModel::new(&sizes, 0.0, &mut rng)?;
    // Nonzero biases keep pre-activations off the ReLU kink.
    let biases = sizes[1..]
        .iter()
        .map(|&n| (0..n).map(|_| rng.random_range(-0.5..0.5)).collect())
        .collect();
    let model = MlpModel::from_parameters(init.weights().to_vec(), biases, 0.0)?;
    let rows = 8;
    let x: Vec<f64> = (0..rows * sizes[0])
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let mut targets = vec![0.0; rows * sizes[3]];
    for row in targets.chunks_mut(sizes[3]) {
        row.iter_mut()
            .for_each(|v| *v = rng.random_range(0.01..1.0));
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    let x = Matrix::from_vec(rows, sizes[0], x)?;
    let targets = Matrix::from_vec(rows, sizes[3], targets)?;
    if !cli.quiet {
        eprintln!("seed {seed}, layers {sizes:?}, batch {rows}, step 1e-5");
    }
    let err = gradient_check(&model, &x, &targets, 1e-5)?;
    emit(cli, &format!("max relative error: {err:.3e}\n"))?;
    if err > 1e-4 {
        bail!("gradient check failed: max relative error {err:.3e} exceeds 1e-4");
    }
    Ok(())
}
