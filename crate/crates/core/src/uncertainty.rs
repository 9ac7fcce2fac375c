//! Bootstrap prediction spread, rolling-window deterioration monitoring and
//! attribution of where the spread comes from.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{explain_dataset, BackgroundStats, ExplainMethod, ExplanationMatrix};
use crate::dataset::{
    rolling_windows, sorted_third_split, standardize_series, Dataset, StandardizationStats,
};
use crate::detectors::c2st_auc;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{fit, ModelSpec, Predictor, Task};
use crate::rng::{derive_seed, SeededRng};
use crate::stats::{quantile_sorted, PSI_BINS};

const MAX_RESAMPLE_RETRIES: u64 = 5;

#[derive(Clone, Debug)]
pub struct BootstrapEnsemble {
    pub members: Vec<Predictor>,
    pub member_seeds: Vec<u64>,
    pub base_spec: ModelSpec,
}

/// ⌈√n⌉, at least 2.
pub fn default_ensemble_size(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(2)
}

/// Fits `b` (default ⌈√n⌉) models on with-replacement resamples of `d`.
///
/// Member k draws its resample from a seed derived from `(seed, k)`. A
/// resample with fewer than two distinct rows, or whose fit fails
/// numerically, is redrawn from a further derived seed up to five times.
pub fn fit_bootstrap_ensemble(
    spec: &ModelSpec,
    d: &Dataset,
    b: Option<usize>,
    seed: u64,
) -> Result<BootstrapEnsemble> {
    d.require_target()?;
    let b = b.unwrap_or_else(|| default_ensemble_size(d.n()));
    if b < 2 {
        return Err(Error::Domain(format!("ensemble needs at least 2 members, got {b}")));
    }
    let fitted: Vec<(u64, Predictor)> = (0..b as u64)
        .into_par_iter()
        .map(|k| fit_member(spec, d, derive_seed(seed, k)))
        .collect::<Result<_>>()?;
    let (member_seeds, members) = fitted.into_iter().unzip();
    Ok(BootstrapEnsemble {
        members,
        member_seeds,
        base_spec: spec.clone(),
    })
}

fn fit_member(spec: &ModelSpec, d: &Dataset, seed: u64) -> Result<(u64, Predictor)> {
    let mut last_err = None;
    for attempt in 0..=MAX_RESAMPLE_RETRIES {
        let s = if attempt == 0 { seed } else { derive_seed(seed, attempt) };
        let idx = SeededRng::new(s).resample_indices(d.n());
        let mut distinct = idx.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 2 {
            last_err = Some(Error::Degenerate("bootstrap resample has a single distinct row".into()));
            continue;
        }
        match fit(spec, &d.select_rows(&idx)) {
            Ok(m) => return Ok((s, m)),
            Err(e) if e.is_numeric() => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

impl BootstrapEnsemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Member predictions, one vector per member.
    pub fn member_predictions(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        self.members.par_iter().map(|m| m.predict(x)).collect()
    }

    /// Width of the central 95% band of member predictions, per row.
    pub fn widths(&self, x: &Matrix) -> Result<Vec<f64>> {
        let preds = self.member_predictions(x)?;
        Ok((0..x.nrows())
            .into_par_iter()
            .map(|i| {
                let column: Vec<f64> = preds.iter().map(|p| p[i]).collect();
                interval_width(column)
            })
            .collect())
    }
}

/// q₀.₉₇₅ − q₀.₀₂₅ with linear interpolation between order statistics.
pub fn interval_width(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    (quantile_sorted(&values, 0.975) - quantile_sorted(&values, 0.025)).max(0.0)
}

pub fn uncertainty_width(e: &BootstrapEnsemble, x0: &[f64]) -> f64 {
    interval_width(e.members.iter().map(|m| m.predict_row(x0)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorMethod {
    Doubt,
    KsInput,
    PsiInput,
    PredKs,
    ExplanationShift,
}

impl MonitorMethod {
    pub const ALL: [MonitorMethod; 5] = [
        MonitorMethod::Doubt,
        MonitorMethod::KsInput,
        MonitorMethod::PsiInput,
        MonitorMethod::PredKs,
        MonitorMethod::ExplanationShift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MonitorMethod::Doubt => "doubt",
            MonitorMethod::KsInput => "ks_input",
            MonitorMethod::PsiInput => "psi_input",
            MonitorMethod::PredKs => "pred_ks",
            MonitorMethod::ExplanationShift => "explanation_shift",
        }
    }
}

/// Which windows define the standardization of the two series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardizeOn {
    AllWindows,
    /// Windows lying entirely in the middle (training) section.
    TrainingWindows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub window: usize,
    pub stride: usize,
    pub method: MonitorMethod,
    pub seed: u64,
    pub ensemble_size: Option<usize>,
    pub standardize_on: StandardizeOn,
    /// Inspector for the explanation-shift method.
    pub inspector: ModelSpec,
}

impl MonitorConfig {
    pub fn new(method: MonitorMethod, seed: u64) -> Self {
        Self {
            window: 50,
            stride: 1,
            method,
            seed,
            ensemble_size: None,
            standardize_on: StandardizeOn::AllWindows,
            inspector: ModelSpec::logistic(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitoringCurve {
    pub method: MonitorMethod,
    pub feature: String,
    /// Window centers as row positions in the sorted data.
    pub centers: Vec<f64>,
    pub monitor: Vec<f64>,
    pub truth: Vec<f64>,
    /// Mean |monitor − truth| over windows entirely in the lower or upper section.
    pub score: f64,
    pub monitor_scale: StandardizationStats,
    pub truth_scale: StandardizationStats,
}

impl MonitoringCurve {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["window_center", "monitor", "truth"])?;
        for i in 0..self.centers.len() {
            wtr.write_record([
                crate::dataset::format_f64(self.centers[i]),
                crate::dataset::format_f64(self.monitor[i]),
                crate::dataset::format_f64(self.truth[i]),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Means over every window of a per-row series, by prefix sums.
fn window_means(values: &[f64], windows: &[std::ops::Range<usize>]) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(values.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in values {
        acc += v;
        prefix.push(acc);
    }
    windows
        .iter()
        .map(|w| (prefix[w.end] - prefix[w.start]) / w.len() as f64)
        .collect()
}

/// KS statistic of `sample` against an already sorted `reference`.
pub fn ks_against_sorted(sample: &[f64], reference: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    let r = reference.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < s.len() {
        let v = s[i];
        let mut j = i;
        while j < s.len() && s[j] == v {
            j += 1;
        }
        let below_ref = reference.partition_point(|&x| x < v) as f64 / r;
        let upto_ref = reference.partition_point(|&x| x <= v) as f64 / r;
        d = d.max((i as f64 / m - below_ref).abs());
        d = d.max((j as f64 / m - upto_ref).abs());
        i = j;
    }
    d
}

/// PSI of `sample` against precomputed interior bin edges and reference proportions.
fn psi_against_edges(sample: &[f64], edges: &[f64], reference_props: &[f64]) -> f64 {
    let mut counts = vec![0usize; edges.len() + 1];
    for x in sample {
        counts[edges.partition_point(|e| e < x)] += 1;
    }
    let n = sample.len() as f64;
    counts
        .iter()
        .zip(reference_props)
        .map(|(&c, &e)| {
            let a = (c as f64 / n).max(crate::stats::PSI_FLOOR);
            (a - e) * (a / e).ln()
        })
        .sum()
}

fn psi_reference(sorted: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut edges: Vec<f64> = (1..PSI_BINS)
        .map(|k| quantile_sorted(sorted, k as f64 / PSI_BINS as f64))
        .collect();
    edges.dedup();
    let mut counts = vec![0usize; edges.len() + 1];
    for x in sorted {
        counts[edges.partition_point(|e| e < x)] += 1;
    }
    let n = sorted.len() as f64;
    let props = counts
        .into_iter()
        .map(|c| (c as f64 / n).max(crate::stats::PSI_FLOOR))
        .collect();
    (edges, props)
}

fn sorted_copy(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Sorted-thirds deterioration experiment for one feature and one method.
///
/// Rows are sorted by `feature` and cut in thirds; the model is fitted on
/// the middle third. Windows slide over the whole sorted data; for each the
/// monitoring value and the model's true MSE are computed, both series are
/// standardized, and the score is the mean absolute difference over windows
/// entirely in the lower or upper third.
pub fn monitor_deterioration(
    spec: &ModelSpec,
    d: &Dataset,
    feature: &str,
    cfg: &MonitorConfig,
) -> Result<MonitoringCurve> {
    d.require_target()?;
    if d.n() < 3 * cfg.window {
        return Err(Error::Domain(format!(
            "monitoring needs at least 3 windows of rows ({}), got {}",
            3 * cfg.window,
            d.n()
        )));
    }
    let (lower, middle, upper) = sorted_third_split(d, feature)?;
    let sorted = lower.concat(&middle)?.concat(&upper)?;
    let model = fit(spec, &middle)?;
    let windows = rolling_windows(sorted.n(), cfg.window, cfg.stride)?;
    let x = sorted.x();
    let y = sorted.require_target()?;

    let preds = model.predict(x)?;
    let sq_err: Vec<f64> = preds.iter().zip(y).map(|(p, t)| (p - t).powi(2)).collect();
    let truth_raw = window_means(&sq_err, &windows);

    let monitor_raw: Vec<f64> = match cfg.method {
        MonitorMethod::Doubt => {
            let ens = fit_bootstrap_ensemble(spec, &middle, cfg.ensemble_size, cfg.seed)?;
            window_means(&ens.widths(x)?, &windows)
        }
        MonitorMethod::KsInput => {
            let refs: Vec<Vec<f64>> = (0..d.p()).map(|j| sorted_copy(&middle.column(j))).collect();
            windows
                .par_iter()
                .map(|w| {
                    (0..d.p())
                        .map(|j| ks_against_sorted(&x.column(j)[w.clone()], &refs[j]))
                        .fold(0.0, f64::max)
                })
                .collect()
        }
        MonitorMethod::PsiInput => {
            let refs: Vec<(Vec<f64>, Vec<f64>)> =
                (0..d.p()).map(|j| psi_reference(&sorted_copy(&middle.column(j)))).collect();
            let columns: Vec<Vec<f64>> = (0..d.p()).map(|j| x.column(j)).collect();
            windows
                .par_iter()
                .map(|w| {
                    (0..d.p())
                        .map(|j| psi_against_edges(&columns[j][w.clone()], &refs[j].0, &refs[j].1))
                        .fold(0.0, f64::max)
                })
                .collect()
        }
        MonitorMethod::PredKs => {
            let reference = sorted_copy(&model.predict(middle.x())?);
            windows
                .par_iter()
                .map(|w| ks_against_sorted(&preds[w.clone()], &reference))
                .collect()
        }
        MonitorMethod::ExplanationShift => {
            let bg = BackgroundStats::from_dataset(&middle)?;
            let reference = explain_dataset(&model, &middle, &ExplainMethod::ShapAuto, &bg)?;
            let all = explain_dataset(&model, &sorted, &ExplainMethod::ShapAuto, &bg)?;
            windows
                .par_iter()
                .enumerate()
                .map(|(k, w)| {
                    let rows: Vec<usize> = w.clone().collect();
                    c2st_auc(
                        &reference.values,
                        &all.values.select_rows(&rows),
                        &cfg.inspector,
                        derive_seed(cfg.seed, k as u64),
                    )
                })
                .collect::<Result<_>>()?
        }
    };

    let (n_lower, n_middle) = (lower.n(), middle.n());
    let in_training = |w: &std::ops::Range<usize>| w.start >= n_lower && w.end <= n_lower + n_middle;
    let scale = |series: &[f64]| -> Result<StandardizationStats> {
        match cfg.standardize_on {
            StandardizeOn::AllWindows => Ok(standardize_series(series)?.1),
            StandardizeOn::TrainingWindows => {
                let sub: Vec<f64> = windows
                    .iter()
                    .zip(series)
                    .filter(|(w, _)| in_training(w))
                    .map(|(_, v)| *v)
                    .collect();
                StandardizationStats::fit(&sub)
            }
        }
    };
    let truth_scale = scale(&truth_raw)?;
    let monitor_scale = scale(&monitor_raw)?;
    let truth: Vec<f64> = truth_raw.iter().map(|&v| truth_scale.apply(v)).collect();
    let monitor: Vec<f64> = monitor_raw.iter().map(|&v| monitor_scale.apply(v)).collect();

    let outside: Vec<usize> = windows
        .iter()
        .enumerate()
        .filter(|(_, w)| w.end <= n_lower || w.start >= n_lower + n_middle)
        .map(|(k, _)| k)
        .collect();
    if outside.is_empty() {
        return Err(Error::Domain("no window lies entirely outside the training section".into()));
    }
    let score = outside.iter().map(|&k| (monitor[k] - truth[k]).abs()).sum::<f64>() / outside.len() as f64;
    Ok(MonitoringCurve {
        method: cfg.method,
        feature: feature.to_owned(),
        centers: windows.iter().map(|w| (w.start + w.end - 1) as f64 / 2.0).collect(),
        monitor,
        truth,
        score,
        monitor_scale,
        truth_scale,
    })
}

#[derive(Clone, Debug)]
pub struct DeteriorationDrivers {
    /// Mean |SHAP| of the surrogate per feature.
    pub global: Vec<f64>,
    /// Surrogate attributions per probe row.
    pub local: ExplanationMatrix,
    pub widths: Vec<f64>,
    pub surrogate: Predictor,
}

/// Fits `surrogate_spec` from probe features to the ensemble's interval
/// width and explains it.
pub fn deterioration_drivers(
    e: &BootstrapEnsemble,
    d_probe: &Dataset,
    surrogate_spec: &ModelSpec,
) -> Result<DeteriorationDrivers> {
    if d_probe.n() < 50 {
        return Err(Error::Domain(format!("need at least 50 probe rows, got {}", d_probe.n())));
    }
    if surrogate_spec.is_classifier() {
        return Err(Error::Domain("the width surrogate must be a regression model".into()));
    }
    let widths = e.widths(d_probe.x())?;
    let probe = d_probe.clone().without_target().with_target("width", widths.clone())?;
    let surrogate = fit(surrogate_spec, &probe)?;
    let bg = BackgroundStats::from_dataset(&probe)?;
    let local = explain_dataset(&surrogate, &probe, &ExplainMethod::ShapAuto, &bg)?;
    Ok(DeteriorationDrivers {
        global: local.mean_abs(),
        local,
        widths,
        surrogate,
    })
}

pub fn default_surrogate() -> ModelSpec {
    ModelSpec::gbdt(Task::Regression)
}
