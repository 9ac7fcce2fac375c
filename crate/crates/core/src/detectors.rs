//! Classifier two-sample detectors on attributions, predictions and inputs.
//!
//! Every detector fits an inspector classifier on one part of the data and
//! reports the AUC of its scores on another part, with a Brunner–Munzel
//! test of AUC > 1/2.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{explain_dataset, BackgroundStats, ExplainMethod, ExplanationMatrix};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{fit, ModelSpec, Predictor};
use crate::rng::{derive_seed, SeededRng};
use crate::stats::{
    accuracy_test, auc, auc_test_asymptotic, auc_test_bm, ks_statistic, ndcg_importance,
    wasserstein1, Alternative, TestResult,
};
use crate::synthgen::{generate, ScenarioKind, ScenarioSpec};
use crate::uncertainty::fit_bootstrap_ensemble;

pub const PREDICTION_COLUMN: &str = "prediction";
const LABEL_COLUMN: &str = "label";
pub const MIN_DRIVER_BOOTSTRAP: usize = 50;

/// A fitted model together with how it is explained.
#[derive(Clone, Debug)]
pub struct AuditedModel {
    pub model: Predictor,
    pub background: BackgroundStats,
    pub method: ExplainMethod,
}

impl AuditedModel {
    pub fn new(model: Predictor, background: BackgroundStats) -> Self {
        Self {
            model,
            background,
            method: ExplainMethod::ShapAuto,
        }
    }

    /// Uses the rows of `training` as background.
    pub fn from_training(model: Predictor, training: &Dataset) -> Result<Self> {
        Ok(Self::new(model, BackgroundStats::from_dataset(training)?))
    }

    pub fn with_method(mut self, method: ExplainMethod) -> Self {
        self.method = method;
        self
    }

    pub fn explain(&self, d: &Dataset) -> Result<ExplanationMatrix> {
        explain_dataset(&self.model, d, &self.method, &self.background)
    }

    pub fn predict(&self, d: &Dataset) -> Result<Vec<f64>> {
        check_model_features(&self.model, d)?;
        self.model.predict(d.x())
    }
}

fn check_model_features(m: &Predictor, d: &Dataset) -> Result<()> {
    if d.feature_names() != m.feature_names.as_slice() {
        return Err(Error::Schema(format!(
            "dataset features [{}] do not match model features [{}]",
            d.feature_names().join(","),
            m.feature_names.join(",")
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    EqualTreatment,
    DemographicParity,
    Combined,
    ExplanationShift,
    InputShift,
    OutputShift,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Driver {
    pub feature: String,
    /// Inspector coefficient, or mean |SHAP| of the inspector when it is not linear.
    pub coefficient: f64,
    pub distance: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct DetectorReport {
    pub kind: DetectorKind,
    pub auc: f64,
    pub test: TestResult,
    pub drivers: Vec<Driver>,
    pub inspector: Predictor,
    pub seed: Option<u64>,
    /// Inspector training inputs, target holding the 0/1 labels.
    pub inspector_data: Dataset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub kind: DetectorKind,
    pub auc: f64,
    pub p_value: f64,
    pub statistic: f64,
    pub ci: [f64; 2],
    pub drivers: Vec<Driver>,
    pub inspector: String,
    pub seed: Option<u64>,
}

impl DetectorReport {
    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            kind: self.kind,
            auc: self.auc,
            p_value: self.test.p_value,
            statistic: self.test.statistic,
            ci: [self.test.ci_low.unwrap_or(0.0), self.test.ci_high.unwrap_or(1.0)],
            drivers: self.drivers.clone(),
            inspector: self.inspector.spec.name().to_owned(),
            seed: self.seed,
        }
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.test.p_value < alpha
    }

    pub fn with_distances(mut self, stats: &[DriverStat]) -> Self {
        for (d, s) in self.drivers.iter_mut().zip(stats) {
            d.distance = Some(s.distance);
        }
        self
    }
}

fn require_inspector(spec: &ModelSpec) -> Result<()> {
    spec.validate()?;
    if !spec.is_classifier() {
        return Err(Error::Domain(format!(
            "inspector must be a classifier, got {}",
            spec.name()
        )));
    }
    Ok(())
}

fn labels_as_f64(labels: &[u8]) -> Vec<f64> {
    labels.iter().map(|&l| f64::from(l)).collect()
}

/// Brunner–Munzel on scores, with a non-rejecting result when the scores
/// carry no ordering at all.
fn score_test(scores: &[f64], labels: &[u8]) -> Result<(f64, TestResult)> {
    let a = auc(scores, labels)?;
    match auc_test_bm(scores, labels) {
        Ok(t) => Ok((a, t)),
        Err(Error::Degenerate(_)) => Ok((
            a,
            TestResult {
                statistic: 0.0,
                p_value: 1.0,
                auc: Some(a),
                ci_low: Some(0.0),
                ci_high: Some(1.0),
                alternative: Alternative::Greater,
            },
        )),
        Err(e) => Err(e),
    }
}

fn inspector_drivers(inspector: &Predictor, train: &Dataset) -> Result<Vec<Driver>> {
    let weights = match inspector.linear() {
        Some((_, w)) => w.to_vec(),
        None => {
            let bg = BackgroundStats::from_dataset(train)?;
            explain_dataset(inspector, train, &ExplainMethod::ShapAuto, &bg)?.mean_abs()
        }
    };
    Ok(train
        .feature_names()
        .iter()
        .zip(weights)
        .map(|(f, c)| Driver {
            feature: f.clone(),
            coefficient: c,
            distance: None,
        })
        .collect())
}

fn fit_and_score(
    kind: DetectorKind,
    train: Dataset,
    test_x: &Matrix,
    test_labels: &[u8],
    spec: &ModelSpec,
    seed: Option<u64>,
) -> Result<DetectorReport> {
    let inspector = fit(spec, &train)?;
    let scores = inspector.predict(test_x)?;
    let (a, test) = score_test(&scores, test_labels)?;
    Ok(DetectorReport {
        kind,
        auc: a,
        test,
        drivers: inspector_drivers(&inspector, &train)?,
        inspector,
        seed,
        inspector_data: train,
    })
}

fn require_both_groups(z: &[u8], what: &str) -> Result<()> {
    if !(z.contains(&0) && z.contains(&1)) {
        return Err(Error::Domain(format!("{what} must contain both protected groups")));
    }
    Ok(())
}

/// Audit on a validation part (inspector training) and a test part (scoring).
fn protected_audit(
    kind: DetectorKind,
    f: &AuditedModel,
    d_val: &Dataset,
    d_te: &Dataset,
    spec: &ModelSpec,
    features: impl Fn(&Dataset) -> Result<(Matrix, Vec<String>)>,
) -> Result<DetectorReport> {
    require_inspector(spec)?;
    let z_val = d_val.require_protected()?;
    let z_te = d_te.require_protected()?;
    for d in [d_val, d_te] {
        if let Some(name) = d.protected_name() {
            if f.model.feature_names.iter().any(|n| n == name) {
                return Err(Error::Schema(format!(
                    "protected attribute '{name}' is an input of the audited model"
                )));
            }
        }
    }
    require_both_groups(z_val, "validation data")?;
    require_both_groups(z_te, "test data")?;
    let (x_val, names) = features(d_val)?;
    let (x_te, _) = features(d_te)?;
    let train = Dataset::new(x_val, names)?.with_target(LABEL_COLUMN, labels_as_f64(z_val))?;
    fit_and_score(kind, train, &x_te, z_te, spec, None)
}

fn explanation_features(f: &AuditedModel, d: &Dataset) -> Result<(Matrix, Vec<String>)> {
    let s = f.explain(d)?;
    Ok((s.values, s.feature_names))
}

fn prediction_features(f: &AuditedModel, d: &Dataset) -> Result<(Matrix, Vec<String>)> {
    let p = f.predict(d)?;
    Ok((Matrix::from_columns(&[p])?, vec![PREDICTION_COLUMN.to_owned()]))
}

/// Equal-treatment inspection: can the protected group be told apart from
/// the model's attributions?
pub fn et_inspect(
    f: &AuditedModel,
    d_val: &Dataset,
    d_te: &Dataset,
    spec: &ModelSpec,
) -> Result<DetectorReport> {
    protected_audit(DetectorKind::EqualTreatment, f, d_val, d_te, spec, |d| {
        explanation_features(f, d)
    })
}

/// Demographic-parity inspection on the model's predictions.
pub fn dp_inspect(
    f: &AuditedModel,
    d_val: &Dataset,
    d_te: &Dataset,
    spec: &ModelSpec,
) -> Result<DetectorReport> {
    protected_audit(DetectorKind::DemographicParity, f, d_val, d_te, spec, |d| {
        prediction_features(f, d)
    })
}

/// Inspection on predictions and attributions side by side.
pub fn combined_inspect(
    f: &AuditedModel,
    d_val: &Dataset,
    d_te: &Dataset,
    spec: &ModelSpec,
) -> Result<DetectorReport> {
    protected_audit(DetectorKind::Combined, f, d_val, d_te, spec, |d| {
        let (p, mut names) = prediction_features(f, d)?;
        let (s, s_names) = explanation_features(f, d)?;
        names.extend(s_names);
        Ok((p.hstack(&s)?, names))
    })
}

/// Classifier two-sample test of `a` (label 0) against `b` (label 1).
///
/// Each group is shuffled with the same derived stream and its first half
/// trains the inspector; the rest is scored. Swapping `a` and `b` therefore
/// swaps the roles of the groups without changing which rows are held out.
fn two_sample(
    kind: DetectorKind,
    a: &Matrix,
    b: &Matrix,
    names: Vec<String>,
    spec: &ModelSpec,
    seed: u64,
) -> Result<DetectorReport> {
    require_inspector(spec)?;
    if a.ncols() != b.ncols() {
        return Err(Error::shape(format!("{} columns", a.ncols()), b.ncols()));
    }
    if a.nrows() < 2 || b.nrows() < 2 {
        return Err(Error::Size(format!(
            "each sample needs at least 2 rows, got {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let halves = |m: &Matrix| {
        let perm = SeededRng::derived(seed, 0).permutation(m.nrows());
        let (tr, te) = perm.split_at(m.nrows() / 2);
        (m.select_rows(tr), m.select_rows(te))
    };
    let (a_tr, a_te) = halves(a);
    let (b_tr, b_te) = halves(b);
    let mut train_labels = vec![0.0; a_tr.nrows()];
    train_labels.resize(a_tr.nrows() + b_tr.nrows(), 1.0);
    let mut test_labels = vec![0u8; a_te.nrows()];
    test_labels.resize(a_te.nrows() + b_te.nrows(), 1);
    let train = Dataset::new(a_tr.vstack(&b_tr)?, names)?.with_target(LABEL_COLUMN, train_labels)?;
    fit_and_score(kind, train, &a_te.vstack(&b_te)?, &test_labels, spec, Some(seed))
}

/// Explanation-shift detector between a validation set and new data.
pub fn shift_detect(
    f: &AuditedModel,
    d_val: &Dataset,
    d_new: &Dataset,
    spec: &ModelSpec,
    seed: u64,
) -> Result<DetectorReport> {
    d_val.check_same_features(d_new)?;
    let (a, names) = explanation_features(f, d_val)?;
    let (b, _) = explanation_features(f, d_new)?;
    two_sample(DetectorKind::ExplanationShift, &a, &b, names, spec, seed)
}

/// Classifier two-sample test on the raw inputs.
pub fn input_c2st(d_val: &Dataset, d_new: &Dataset, spec: &ModelSpec, seed: u64) -> Result<DetectorReport> {
    d_val.check_same_features(d_new)?;
    two_sample(
        DetectorKind::InputShift,
        d_val.x(),
        d_new.x(),
        d_val.feature_names().to_vec(),
        spec,
        seed,
    )
}

/// Classifier two-sample test on the model's predictions.
pub fn output_c2st(
    f: &AuditedModel,
    d_val: &Dataset,
    d_new: &Dataset,
    spec: &ModelSpec,
    seed: u64,
) -> Result<DetectorReport> {
    d_val.check_same_features(d_new)?;
    let (a, names) = prediction_features(f, d_val)?;
    let (b, _) = prediction_features(f, d_new)?;
    two_sample(DetectorKind::OutputShift, &a, &b, names, spec, seed)
}

/// AUC of a two-sample test between two unnamed matrices.
pub fn c2st_auc(a: &Matrix, b: &Matrix, spec: &ModelSpec, seed: u64) -> Result<f64> {
    let names = (0..a.ncols()).map(|j| format!("c{j}")).collect();
    Ok(two_sample(DetectorKind::ExplanationShift, a, b, names, spec, seed)?.auc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineOptions {
    pub inspector: ModelSpec,
    /// Bootstrap members for the uncertainty baseline; ⌈√n⌉ when unset.
    pub ensemble_size: Option<usize>,
    pub include_uncertainty: bool,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            inspector: ModelSpec::logistic(),
            ensemble_size: None,
            include_uncertainty: true,
        }
    }
}

/// All shift scores for one pair of samples. Higher means more shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftScoreboard {
    /// Largest per-feature KS statistic on the inputs.
    pub b1_input_ks: f64,
    /// Wasserstein-1 distance of predictions.
    pub b2_prediction_w1: f64,
    /// 1 − NDCG of mean |SHAP| importance.
    pub b3_importance_ndcg: f64,
    pub b4_prediction_ks: f64,
    /// Mean bootstrap interval width on the new data.
    pub b5_uncertainty: Option<f64>,
    pub b6_input_c2st: f64,
    pub b7_output_c2st: f64,
    pub explanation_shift: f64,
}

impl ShiftScoreboard {
    pub fn entries(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("b1_input_ks", Some(self.b1_input_ks)),
            ("b2_prediction_w1", Some(self.b2_prediction_w1)),
            ("b3_importance_ndcg", Some(self.b3_importance_ndcg)),
            ("b4_prediction_ks", Some(self.b4_prediction_ks)),
            ("b5_uncertainty", self.b5_uncertainty),
            ("b6_input_c2st", Some(self.b6_input_c2st)),
            ("b7_output_c2st", Some(self.b7_output_c2st)),
            ("explanation_shift", Some(self.explanation_shift)),
        ]
    }
}

pub fn baseline_suite(
    f: &AuditedModel,
    d_val: &Dataset,
    d_new: &Dataset,
    opts: &BaselineOptions,
    seed: u64,
) -> Result<ShiftScoreboard> {
    d_val.check_same_features(d_new)?;
    let b1 = (0..d_val.p())
        .map(|j| ks_statistic(&d_val.column(j), &d_new.column(j)))
        .fold(0.0, f64::max);
    let p_val = f.predict(d_val)?;
    let p_new = f.predict(d_new)?;
    let s_val = f.explain(d_val)?;
    let s_new = f.explain(d_new)?;
    let b5 = if opts.include_uncertainty {
        let e = fit_bootstrap_ensemble(&f.model.spec, d_val, opts.ensemble_size, derive_seed(seed, 5))?;
        let w = e.widths(d_new.x())?;
        Some(w.iter().sum::<f64>() / w.len() as f64)
    } else {
        None
    };
    Ok(ShiftScoreboard {
        b1_input_ks: b1,
        b2_prediction_w1: wasserstein1(&p_val, &p_new)?,
        b3_importance_ndcg: 1.0 - ndcg_importance(&s_val.mean_abs(), &s_new.mean_abs())?,
        b4_prediction_ks: ks_statistic(&p_val, &p_new),
        b5_uncertainty: b5,
        b6_input_c2st: input_c2st(d_val, d_new, &opts.inspector, seed)?.auc,
        b7_output_c2st: output_c2st(f, d_val, d_new, &opts.inspector, seed)?.auc,
        explanation_shift: shift_detect(f, d_val, d_new, &opts.inspector, seed)?.auc,
    })
}

/// Per-feature driver statistics of a detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriverStat {
    pub feature: String,
    /// W1 between bootstrap coefficients under true and permuted labels,
    /// or the inspector's mean |SHAP| when it is not linear.
    pub distance: f64,
    pub true_mean: Option<f64>,
    pub true_std: Option<f64>,
    pub random_mean: Option<f64>,
    pub random_std: Option<f64>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
    (m, var.sqrt())
}

/// Bootstraps the inspector on its own training data with the true labels
/// and with permuted labels, and measures per feature how far apart the two
/// coefficient distributions are.
pub fn explain_drivers(report: &DetectorReport, n_bootstrap: usize, seed: u64) -> Result<Vec<DriverStat>> {
    if n_bootstrap < MIN_DRIVER_BOOTSTRAP {
        return Err(Error::Domain(format!(
            "driver bootstrap needs at least {MIN_DRIVER_BOOTSTRAP} rounds, got {n_bootstrap}"
        )));
    }
    let data = &report.inspector_data;
    let names = data.feature_names();
    if report.inspector.linear().is_none() {
        return Ok(report
            .drivers
            .iter()
            .map(|d| DriverStat {
                feature: d.feature.clone(),
                distance: d.coefficient,
                true_mean: None,
                true_std: None,
                random_mean: None,
                random_std: None,
            })
            .collect());
    }
    let spec = &report.inspector.spec;
    let labels = data.require_target()?;
    let n = data.n();
    let rounds: Vec<(Vec<f64>, Vec<f64>)> = (0..n_bootstrap as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = SeededRng::new(derive_seed(seed, b));
            let idx = rng.resample_indices(n);
            let perm = rng.permutation(n);
            let boot = data.select_rows(&idx);
            let permuted: Vec<f64> = idx.iter().map(|&i| labels[perm[i]]).collect();
            let coefs = |d: &Dataset| -> Result<Vec<f64>> {
                let m = fit(spec, d)?;
                Ok(m.linear().expect("linear inspector").1.to_vec())
            };
            Ok((coefs(&boot)?, coefs(&boot.with_target_values(permuted)?)?))
        })
        .collect::<Result<_>>()?;
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let t: Vec<f64> = rounds.iter().map(|r| r.0[j]).collect();
            let r: Vec<f64> = rounds.iter().map(|r| r.1[j]).collect();
            let (tm, ts) = mean_std(&t);
            let (rm, rs) = mean_std(&r);
            Ok(DriverStat {
                feature: name.clone(),
                distance: wasserstein1(&t, &r)?,
                true_mean: Some(tm),
                true_std: Some(ts),
                random_mean: Some(rm),
                random_std: Some(rs),
            })
        })
        .collect()
}

/// Rejection rates of three AUC/accuracy tests at one point of the
/// power study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub mu: f64,
    pub q: f64,
    pub n: usize,
    pub runs: usize,
    pub bm: f64,
    pub accuracy: f64,
    pub asymptotic: f64,
}

impl PowerPoint {
    /// Monte Carlo standard error of a rejection rate.
    pub fn standard_error(&self, rate: f64) -> f64 {
        (rate * (1.0 - rate) / self.runs as f64).sqrt()
    }
}

fn rejects(result: Result<TestResult>, alpha: f64) -> Result<bool> {
    match result {
        Ok(t) => Ok(t.p_value < alpha),
        Err(Error::Degenerate(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// One run: the inspector is trained on a random half of a two-class
/// sample and its held-out scores are tested three ways. Returns whether
/// each of (Brunner–Munzel, accuracy, asymptotic) rejects.
fn power_run(mu: f64, q: f64, n: usize, alpha: f64, inspector: &ModelSpec, seed: u64) -> Result<[bool; 3]> {
    let d = generate(&ScenarioSpec::new(ScenarioKind::Power { mu, q }, n, seed))?.train;
    let z = d.require_protected()?;
    let perm = SeededRng::derived(seed, 9).permutation(n);
    let (tr, te) = perm.split_at(n / 2);
    let labels_tr: Vec<f64> = tr.iter().map(|&i| f64::from(z[i])).collect();
    let labels_te: Vec<u8> = te.iter().map(|&i| z[i]).collect();
    if !(labels_te.contains(&0) && labels_te.contains(&1)) {
        return Ok([false; 3]);
    }
    let train = Dataset::new(d.x().select_rows(tr), d.feature_names().to_vec())?
        .with_target(LABEL_COLUMN, labels_tr)?;
    let g = fit(inspector, &train)?;
    let scores = g.predict(&d.x().select_rows(te))?;
    let correct = scores
        .iter()
        .zip(&labels_te)
        .filter(|(s, &l)| u8::from(**s > 0.5) == l)
        .count();
    // best accuracy reachable without signal: 1/2 for balanced groups
    let majority = q.max(1.0 - q);
    Ok([
        rejects(auc_test_bm(&scores, &labels_te), alpha)?,
        rejects(accuracy_test(correct, labels_te.len(), majority), alpha)?,
        rejects(auc_test_asymptotic(&scores, &labels_te), alpha)?,
    ])
}

/// Monte Carlo power of the Brunner–Munzel AUC test, the accuracy test
/// against the majority-class prior max(q, 1 − q), and the asymptotic AUC test.
pub fn power_point(
    mu: f64,
    q: f64,
    n: usize,
    runs: usize,
    alpha: f64,
    inspector: &ModelSpec,
    seed: u64,
) -> Result<PowerPoint> {
    require_inspector(inspector)?;
    if runs == 0 || n < 4 {
        return Err(Error::Domain(format!("power study needs runs >= 1 and n >= 4 (got {runs}, {n})")));
    }
    let outcomes: Vec<[bool; 3]> = (0..runs as u64)
        .into_par_iter()
        .map(|r| power_run(mu, q, n, alpha, inspector, derive_seed(seed, r)))
        .collect::<Result<_>>()?;
    let rate = |k: usize| outcomes.iter().filter(|o| o[k]).count() as f64 / runs as f64;
    Ok(PowerPoint {
        mu,
        q,
        n,
        runs,
        bm: rate(0),
        accuracy: rate(1),
        asymptotic: rate(2),
    })
}
