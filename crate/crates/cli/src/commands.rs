//! Subcommand implementations.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use attrishift::dataset::{load_csv, split_three_way, write_csv};
use attrishift::detectors::{
    baseline_suite, dp_inspect, et_inspect, explain_drivers, power_point, shift_detect, BaselineOptions,
    DriverStat, PowerPoint, ReportSummary, MIN_DRIVER_BOOTSTRAP,
};
use attrishift::rng::derive_seed;
use attrishift::synthgen::{generate, EtCase, TargetMode};
use attrishift::uncertainty::{
    default_surrogate, deterioration_drivers, fit_bootstrap_ensemble, monitor_deterioration, StandardizeOn,
};
use attrishift::{
    fit, AuditedModel, CsvSchema, Dataset, Error, MonitorConfig, MonitorMethod, ScenarioKind, ScenarioSpec,
    ShiftScoreboard,
};

use crate::output::{file_digest, Run};
use crate::{inspector_spec, CliError, Common, InspectorKind, ModelArgs};

const THIRD: f64 = 1.0 / 3.0;

fn load(path: &Path, target: Option<&str>, protected: Option<&str>) -> Result<Dataset, CliError> {
    Ok(load_csv(path, &CsvSchema::new(target, protected))?)
}

/// Loads data to be compared against a training file; the target column is
/// optional there.
fn load_unlabelled(path: &Path, target: &str) -> Result<Dataset, CliError> {
    match load_csv(path, &CsvSchema::new(Some(target), None)) {
        Ok(d) => Ok(d),
        Err(Error::Schema(m)) if m.contains(&format!("'{target}'")) => load(path, None, None),
        Err(e) => Err(e.into()),
    }
}

fn fitted(d: &Dataset, model: &ModelArgs, seed: u64) -> Result<AuditedModel, CliError> {
    let f = fit(&model.spec(), d)?;
    Ok(AuditedModel::from_training(f, d)?.with_method(model.method(derive_seed(seed, 1))))
}

fn model_config(model: &ModelArgs) -> Value {
    json!({ "spec": model.spec(), "explainer": model.explainer, "lime_samples": model.lime_samples })
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    /// Labelled CSV holding the features, target and protected column.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub target: String,
    /// Binary protected attribute; excluded from the model's features.
    #[arg(long)]
    pub protected: String,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = InspectorKind::Logistic)]
    pub inspector: InspectorKind,
    /// Bootstrap rounds for driver distances (0 skips them, else at least 50).
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Serialize)]
struct AuditResult {
    rows: [usize; 3],
    equal_treatment: ReportSummary,
    demographic_parity: ReportSummary,
    equal_treatment_drivers: Option<Vec<DriverStat>>,
    demographic_parity_drivers: Option<Vec<DriverStat>>,
}

pub fn audit(a: &AuditArgs) -> Result<(), CliError> {
    if a.bootstrap != 0 && a.bootstrap < MIN_DRIVER_BOOTSTRAP {
        return Err(CliError::usage(format!(
            "--bootstrap must be 0 or at least {MIN_DRIVER_BOOTSTRAP}"
        )));
    }
    let seed = a.common.seed;
    let config = json!({
        "command": "audit",
        "input": file_digest(&a.input)?,
        "target": a.target,
        "protected": a.protected,
        "model": model_config(&a.model),
        "inspector": inspector_spec(a.inspector),
        "bootstrap": a.bootstrap,
        "split": [THIRD, THIRD, THIRD],
        "seed": seed,
    });
    let run = Run::new(config, seed, &a.common.out, a.common.json_only)?;
    let d = load(&a.input, Some(&a.target), Some(&a.protected))?;
    let (tr, va, te) = split_three_way(&d, (THIRD, THIRD, THIRD), seed)?;
    let f = fitted(&tr, &a.model, seed)?;
    let g = inspector_spec(a.inspector);
    let mut et = et_inspect(&f, &va, &te, &g)?;
    let mut dp = dp_inspect(&f, &va, &te, &g)?;
    let (mut et_stats, mut dp_stats) = (None, None);
    if a.bootstrap > 0 {
        let s = explain_drivers(&et, a.bootstrap, derive_seed(seed, 2))?;
        et = et.with_distances(&s);
        et_stats = Some(s);
        let s = explain_drivers(&dp, a.bootstrap, derive_seed(seed, 3))?;
        dp = dp.with_distances(&s);
        dp_stats = Some(s);
    }
    run.write_report(
        "audit.json",
        &AuditResult {
            rows: [tr.n(), va.n(), te.n()],
            equal_treatment: et.summary(),
            demographic_parity: dp.summary(),
            equal_treatment_drivers: et_stats,
            demographic_parity_drivers: dp_stats,
        },
    )?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct ShiftArgs {
    /// Labelled reference CSV, split in halves for fitting and validation.
    #[arg(long)]
    pub input: PathBuf,
    /// New data to compare; its target column may be absent.
    #[arg(long)]
    pub new: PathBuf,
    #[arg(long)]
    pub target: String,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = InspectorKind::Logistic)]
    pub inspector: InspectorKind,
    /// Skip the bootstrap-uncertainty baseline.
    #[arg(long)]
    pub no_uncertainty: bool,
    /// Bootstrap members for the uncertainty baseline (default ⌈√n⌉).
    #[arg(long)]
    pub ensemble_size: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Serialize)]
struct ShiftResult {
    rows: [usize; 3],
    explanation_shift: ReportSummary,
    scoreboard: ShiftScoreboard,
}

pub fn shift(a: &ShiftArgs) -> Result<(), CliError> {
    let seed = a.common.seed;
    let opts = BaselineOptions {
        inspector: inspector_spec(a.inspector),
        ensemble_size: a.ensemble_size,
        include_uncertainty: !a.no_uncertainty,
    };
    let config = json!({
        "command": "shift",
        "input": file_digest(&a.input)?,
        "new": file_digest(&a.new)?,
        "target": a.target,
        "model": model_config(&a.model),
        "baselines": opts,
        "split": [0.5, 0.5],
        "seed": seed,
    });
    let run = Run::new(config, seed, &a.common.out, a.common.json_only)?;
    let d = load(&a.input, Some(&a.target), None)?;
    let new = load_unlabelled(&a.new, &a.target)?.without_target();
    let (tr, va, _) = split_three_way(&d, (0.5, 0.5, 0.0), seed)?;
    let f = fitted(&tr, &a.model, seed)?;
    let report = shift_detect(&f, &va, &new, &opts.inspector, seed)?;
    let board = baseline_suite(&f, &va, &new, &opts, seed)?;
    run.write_csv("scoreboard.csv", |buf| {
        let mut w = csv_writer(buf);
        w.write_record(["detector", "score"]).map_err(Error::from)?;
        for (name, v) in board.entries() {
            let v = v.map(attrishift::dataset::format_f64).unwrap_or_default();
            w.write_record([name, v.as_str()]).map_err(Error::from)?;
        }
        w.flush()?;
        Ok(())
    })?;
    run.write_report(
        "shift.json",
        &ShiftResult {
            rows: [tr.n(), va.n(), new.n()],
            explanation_shift: report.summary(),
            scoreboard: board,
        },
    )?;
    Ok(())
}

fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::Writer::from_writer(buf)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Doubt,
    KsInput,
    PsiInput,
    PredKs,
    ExplanationShift,
    All,
}

impl MethodChoice {
    fn methods(self) -> Vec<MonitorMethod> {
        match self {
            MethodChoice::Doubt => vec![MonitorMethod::Doubt],
            MethodChoice::KsInput => vec![MonitorMethod::KsInput],
            MethodChoice::PsiInput => vec![MonitorMethod::PsiInput],
            MethodChoice::PredKs => vec![MonitorMethod::PredKs],
            MethodChoice::ExplanationShift => vec![MonitorMethod::ExplanationShift],
            MethodChoice::All => MonitorMethod::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StandardizeChoice {
    All,
    Training,
}

#[derive(Args, Debug)]
pub struct MonitorArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub target: String,
    /// Feature the rows are sorted by.
    #[arg(long)]
    pub feature: String,
    #[arg(long, value_enum, default_value_t = MethodChoice::All)]
    pub method: MethodChoice,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Rolling window length in rows.
    #[arg(long, default_value_t = 50)]
    pub windows: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long)]
    pub ensemble_size: Option<usize>,
    /// Windows whose statistics standardize both series.
    #[arg(long, value_enum, default_value_t = StandardizeChoice::All)]
    pub standardize: StandardizeChoice,
    #[arg(long, value_enum, default_value_t = InspectorKind::Logistic)]
    pub inspector: InspectorKind,
    /// Unlabelled probe CSV; when given, the interval width of an ensemble
    /// fitted on the input is attributed to the probe's features.
    #[arg(long)]
    pub probe: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Serialize)]
struct CurveSummary {
    method: MonitorMethod,
    feature: String,
    score: f64,
    windows: usize,
}

#[derive(Serialize)]
struct FeatureImportance {
    feature: String,
    importance: f64,
}

#[derive(Serialize)]
struct MonitorResult {
    curves: Vec<CurveSummary>,
    drivers: Option<Vec<FeatureImportance>>,
}

pub fn monitor(a: &MonitorArgs) -> Result<(), CliError> {
    let seed = a.common.seed;
    let methods = a.method.methods();
    let base = MonitorConfig {
        window: a.windows,
        stride: a.stride,
        ensemble_size: a.ensemble_size,
        standardize_on: match a.standardize {
            StandardizeChoice::All => StandardizeOn::AllWindows,
            StandardizeChoice::Training => StandardizeOn::TrainingWindows,
        },
        inspector: inspector_spec(a.inspector),
        ..MonitorConfig::new(MonitorMethod::Doubt, seed)
    };
    let config = json!({
        "command": "monitor",
        "input": file_digest(&a.input)?,
        "probe": a.probe.as_deref().map(file_digest).transpose()?,
        "target": a.target,
        "feature": a.feature,
        "methods": methods,
        "model": a.model.spec(),
        "window": base.window,
        "stride": base.stride,
        "ensemble_size": base.ensemble_size,
        "standardize_on": base.standardize_on,
        "inspector": base.inspector,
        "surrogate": a.probe.as_ref().map(|_| default_surrogate()),
        "seed": seed,
    });
    let run = Run::new(config, seed, &a.common.out, a.common.json_only)?;
    let d = load(&a.input, Some(&a.target), None)?;
    let spec = a.model.spec();
    let mut curves = Vec::new();
    for method in methods {
        let cfg = MonitorConfig { method, ..base.clone() };
        let curve = monitor_deterioration(&spec, &d, &a.feature, &cfg)?;
        run.write_csv(&format!("monitor_{}.csv", method.name()), |buf| curve.write_csv(buf))?;
        curves.push(CurveSummary {
            method,
            feature: curve.feature.clone(),
            score: curve.score,
            windows: curve.centers.len(),
        });
    }
    let drivers = match &a.probe {
        Some(path) => {
            let probe = load_unlabelled(path, &a.target)?.without_target();
            let e = fit_bootstrap_ensemble(&spec, &d, a.ensemble_size, derive_seed(seed, 7))?;
            let dd = deterioration_drivers(&e, &probe, &default_surrogate())?;
            run.write_csv("drivers_local.csv", |buf| dd.local.write_csv(buf))?;
            Some(
                probe
                    .feature_names()
                    .iter()
                    .zip(&dd.global)
                    .map(|(f, &v)| FeatureImportance {
                        feature: f.clone(),
                        importance: v,
                    })
                    .collect(),
            )
        }
        None => None,
    };
    run.write_report("monitor.json", &MonitorResult { curves, drivers })?;
    Ok(())
}

pub const DEFAULT_MU_GRID: [f64; 8] = [0.005, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5];

#[derive(Args, Debug)]
pub struct PowerArgs {
    /// Mean separations to evaluate.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_MU_GRID)]
    pub mu: Vec<f64>,
    /// Group-1 proportions to evaluate.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.2])]
    pub q: Vec<f64>,
    /// Sample size per run.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub runs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = InspectorKind::Logistic)]
    pub inspector: InspectorKind,
    #[command(flatten)]
    pub common: Common,
}

pub fn power(a: &PowerArgs) -> Result<(), CliError> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::usage(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    let seed = a.common.seed;
    let g = inspector_spec(a.inspector);
    let config = json!({
        "command": "power",
        "mu": a.mu,
        "q": a.q,
        "n": a.n,
        "runs": a.runs,
        "alpha": a.alpha,
        "inspector": g,
        "seed": seed,
    });
    let run = Run::new(config, seed, &a.common.out, a.common.json_only)?;
    let mut points: Vec<PowerPoint> = Vec::new();
    for (qi, &q) in a.q.iter().enumerate() {
        for (mi, &mu) in a.mu.iter().enumerate() {
            let point_seed = derive_seed(derive_seed(seed, qi as u64), mi as u64);
            points.push(power_point(mu, q, a.n, a.runs, a.alpha, &g, point_seed)?);
        }
    }
    run.write_csv("power.csv", |buf| {
        let mut w = csv_writer(buf);
        w.write_record(["q", "mu", "bm", "accuracy", "asymptotic", "runs"]).map_err(Error::from)?;
        for p in &points {
            let f = attrishift::dataset::format_f64;
            w.write_record([f(p.q), f(p.mu), f(p.bm), f(p.accuracy), f(p.asymptotic), p.runs.to_string()])
                .map_err(Error::from)?;
        }
        w.flush()?;
        Ok(())
    })?;
    run.write_report("power.json", &points)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioChoice {
    EtIndirect,
    EtUninformative,
    CovariateRho,
    ConceptPair,
    UnusedFeature,
    Yule,
    UniformSwap,
    Power,
    Deterioration,
    SweepReplace,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioChoice,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Correlation of the protected group with x3 (equal-treatment scenarios).
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// Use the five-feature equal-treatment design.
    #[arg(long)]
    pub five_features: bool,
    /// Draw binary labels instead of probabilities (equal-treatment scenarios).
    #[arg(long)]
    pub bernoulli: bool,
    /// Correlation between x1 and x2 in the new sample.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Add an independent third feature (covariate-rho).
    #[arg(long)]
    pub extra_feature: bool,
    /// Mean separation (power scenario).
    #[arg(long, default_value_t = 0.1)]
    pub mu: f64,
    /// Group-1 proportion (power scenario).
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    /// Shift added to the unused feature.
    #[arg(long, default_value_t = 1.0)]
    pub shift: f64,
    /// Feature replaced by the sweep, 1-based.
    #[arg(long, default_value_t = 1)]
    pub feature: usize,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
    pub hi: f64,
    #[command(flatten)]
    pub common: Common,
}

impl SynthArgs {
    fn kind(&self) -> Result<ScenarioKind, CliError> {
        let et = |case| ScenarioKind::EtFairness {
            gamma: self.gamma,
            case,
            five_features: self.five_features,
            target: if self.bernoulli {
                TargetMode::Bernoulli
            } else {
                TargetMode::Probability
            },
        };
        Ok(match self.scenario {
            ScenarioChoice::EtIndirect => et(EtCase::Indirect),
            ScenarioChoice::EtUninformative => et(EtCase::Uninformative),
            ScenarioChoice::CovariateRho => ScenarioKind::CovariateRho {
                rho: self.rho,
                extra_feature: self.extra_feature,
            },
            ScenarioChoice::ConceptPair => ScenarioKind::ConceptPair,
            ScenarioChoice::UnusedFeature => ScenarioKind::UnusedFeature { shift: self.shift },
            ScenarioChoice::Yule => ScenarioKind::Yule,
            ScenarioChoice::UniformSwap => ScenarioKind::UniformSwap,
            ScenarioChoice::Power => ScenarioKind::Power { mu: self.mu, q: self.q },
            ScenarioChoice::Deterioration => ScenarioKind::Deterioration,
            ScenarioChoice::SweepReplace => {
                if self.feature == 0 {
                    return Err(CliError::usage("--feature is 1-based"));
                }
                ScenarioKind::SweepReplace {
                    feature: self.feature - 1,
                    lo: self.lo,
                    hi: self.hi,
                }
            }
        })
    }
}

#[derive(Serialize)]
struct SynthResult {
    files: Vec<String>,
    rows: usize,
}

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let seed = a.common.seed;
    let spec = ScenarioSpec::new(a.kind()?, a.n, seed);
    let config = json!({ "command": "synth", "scenario": spec, "seed": seed });
    let run = Run::new(config, seed, &a.common.out, a.common.json_only)?;
    let data = generate(&spec)?;
    let mut parts: Vec<(&str, Dataset)> = vec![("train.csv", data.train.clone()), ("new.csv", data.new)];
    if let Some(test) = data.test {
        parts.push(("test.csv", test));
    }
    if let Some(alt) = data.alt_target {
        parts.push(("train_alt.csv", data.train.with_target_values(alt)?));
    }
    let mut files = Vec::new();
    for (name, d) in &parts {
        if run.write_csv(name, |buf| write_csv(d, buf))?.is_some() {
            files.push((*name).to_owned());
        }
    }
    run.write_report("synth.json", &SynthResult { files, rows: a.n })?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct ShapArgs {
    /// Labelled CSV the model is fitted on; also the attribution background.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub target: String,
    /// Rows to explain (defaults to the input).
    #[arg(long)]
    pub new: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Serialize)]
struct ShapResult {
    rows: usize,
    base_value: f64,
    mean_abs: Vec<FeatureImportance>,
}

pub fn shap(a: &ShapArgs) -> Result<(), CliError> {
    let seed = a.common.seed;
    let config = json!({
        "command": "shap",
        "input": file_digest(&a.input)?,
        "new": a.new.as_deref().map(file_digest).transpose()?,
        "target": a.target,
        "model": model_config(&a.model),
        "seed": seed,
    });
    let run = Run::new(config, seed, &a.common.out, a.common.json_only)?;
    let d = load(&a.input, Some(&a.target), None)?;
    let f = fitted(&d, &a.model, seed)?;
    let rows = match &a.new {
        Some(path) => load_unlabelled(path, &a.target)?.without_target(),
        None => d.clone().without_target(),
    };
    let s = f.explain(&rows)?;
    run.write_csv("explanations.csv", |buf| s.write_csv(buf))?;
    let mean_abs = s
        .feature_names
        .iter()
        .zip(s.mean_abs())
        .map(|(f, v)| FeatureImportance {
            feature: f.clone(),
            importance: v,
        })
        .collect();
    run.write_report(
        "shap.json",
        &ShapResult {
            rows: s.n(),
            base_value: s.base_value,
            mean_abs,
        },
    )?;
    Ok(())
}
