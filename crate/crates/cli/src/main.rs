//! `attrishift` command-line tool.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 numeric
//! failure. Errors are printed to stderr as one JSON object.

mod commands;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use attrishift::{ExplainMethod, LimeConfig, ModelSpec, Task};

pub const THREADS_ENV: &str = "ATTRISHIFT_THREADS";

#[derive(Parser)]
#[command(name = "attrishift", version, about = "Audit tabular models through their explanations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equal-treatment and demographic-parity inspectors for a protected attribute.
    Audit(commands::AuditArgs),
    /// Explanation-shift detector and the baseline scoreboard.
    Shift(commands::ShiftArgs),
    /// Sorted-thirds deterioration monitoring curves.
    Monitor(commands::MonitorArgs),
    /// Power of the AUC and accuracy tests on the two-Gaussian design.
    Power(commands::PowerArgs),
    /// Generate a synthetic scenario as CSV files.
    Synth(commands::SynthArgs),
    /// Attribution matrix of a fitted model.
    Shap(commands::ShapArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Master seed; every random choice of the run derives from it.
    #[arg(long)]
    pub seed: u64,
    /// Output directory, created if absent.
    #[arg(long, default_value = "attrishift-out")]
    pub out: PathBuf,
    /// Write JSON reports only, no CSV files.
    #[arg(long)]
    pub json_only: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ols,
    Ridge,
    Logistic,
    Tree,
    Gbdt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Classification,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InspectorKind {
    Logistic,
    Tree,
    Gbdt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainerKind {
    Shap,
    ShapObservational,
    Lime,
}

/// Model flags of commands that fit the audited model.
#[derive(Args, Clone, Debug)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::Gbdt)]
    pub model: ModelKind,
    /// Task for tree models; linear models imply their own.
    #[arg(long, value_enum, default_value_t = TaskKind::Regression)]
    pub task: TaskKind,
    #[arg(long, value_enum, default_value_t = ExplainerKind::Shap)]
    pub explainer: ExplainerKind,
    /// Perturbation samples per row for LIME.
    #[arg(long, default_value_t = 1000)]
    pub lime_samples: usize,
}

impl ModelArgs {
    pub fn spec(&self) -> ModelSpec {
        let task = match self.task {
            TaskKind::Regression => Task::Regression,
            TaskKind::Classification => Task::Classification,
        };
        match self.model {
            ModelKind::Ols => ModelSpec::Ols,
            ModelKind::Ridge => ModelSpec::ridge(),
            ModelKind::Logistic => ModelSpec::logistic(),
            ModelKind::Tree => ModelSpec::tree(task),
            ModelKind::Gbdt => ModelSpec::gbdt(task),
        }
    }

    pub fn method(&self, seed: u64) -> ExplainMethod {
        match self.explainer {
            ExplainerKind::Shap => ExplainMethod::ShapAuto,
            ExplainerKind::ShapObservational => ExplainMethod::ShapObservational,
            ExplainerKind::Lime => ExplainMethod::Lime(LimeConfig {
                n_samples: self.lime_samples,
                kernel_width: None,
                seed,
            }),
        }
    }
}

pub fn inspector_spec(kind: InspectorKind) -> ModelSpec {
    match kind {
        InspectorKind::Logistic => ModelSpec::logistic(),
        InspectorKind::Tree => ModelSpec::tree(Task::Classification),
        InspectorKind::Gbdt => ModelSpec::gbdt(Task::Classification),
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind: "usage".into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: 2,
            kind: "io".into(),
            message: format!("{}: {e}", path.display()),
        }
    }

    pub fn internal(e: impl std::fmt::Display) -> Self {
        Self {
            code: 3,
            kind: "internal".into(),
            message: e.to_string(),
        }
    }
}

impl From<attrishift::Error> for CliError {
    fn from(e: attrishift::Error) -> Self {
        Self {
            code: if e.is_numeric() { 3 } else { 2 },
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(CliError::internal)
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Audit(a) => commands::audit(&a),
        Command::Shift(a) => commands::shift(&a),
        Command::Monitor(a) => commands::monitor(&a),
        Command::Power(a) => commands::power(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Shap(a) => commands::shap(&a),
    }
}

fn report_error(e: &CliError) {
    let doc = serde_json::json!({
        "error": { "kind": e.kind, "message": e.message, "exit_code": e.code }
    });
    eprintln!("{doc}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::usage(e.to_string().trim_end());
            report_error(&err);
            return ExitCode::from(err.code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&e);
            ExitCode::from(e.code)
        }
    }
}
