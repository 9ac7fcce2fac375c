//! Feature attributions: Shapley values for linear and tree models, the
//! exact subset-enumeration reference, and a tabular LIME surrogate.
//!
//! All explainers work on the raw score of a [`Predictor`] (log-odds for
//! logistic regression, margin for boosted classifiers).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{format_f64, Dataset};
use crate::error::{Error, Result};
use crate::matrix::{weighted_least_squares, Matrix};
use crate::models::{Predictor, Tree};
use crate::rng::{derive_seed, SeededRng};

/// Largest p accepted by the public enumeration routine.
pub const MAX_ENUMERATION_FEATURES: usize = 12;
/// Largest p for the Gaussian observational explainer (2^p subsets).
pub const MAX_OBSERVATIONAL_FEATURES: usize = 20;
const COVARIANCE_JITTER: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundStats {
    pub means: Vec<f64>,
    /// Row-major p×p population covariance.
    pub covariance: Vec<f64>,
    pub rows: Matrix,
}

impl BackgroundStats {
    pub fn from_matrix(rows: &Matrix) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::Domain("background data is empty".into()));
        }
        Ok(Self {
            means: rows.column_means(),
            covariance: rows.covariance(),
            rows: rows.clone(),
        })
    }

    pub fn from_dataset(d: &Dataset) -> Result<Self> {
        Self::from_matrix(d.x())
    }

    pub fn p(&self) -> usize {
        self.means.len()
    }

    pub fn std(&self, j: usize) -> f64 {
        self.covariance[j * self.p() + j].max(0.0).sqrt()
    }
}

/// Attributions for every row of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationMatrix {
    pub values: Matrix,
    pub feature_names: Vec<String>,
    pub base_value: f64,
}

impl ExplanationMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j)
    }

    /// Mean absolute attribution per feature.
    pub fn mean_abs(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.values.ncols()];
        for r in self.values.rows_iter() {
            for (a, v) in acc.iter_mut().zip(r) {
                *a += v.abs();
            }
        }
        let n = self.n().max(1) as f64;
        acc.into_iter().map(|a| a / n).collect()
    }

    /// The attributions as a feature-only dataset (same column names).
    pub fn to_dataset(&self) -> Result<Dataset> {
        Dataset::new(self.values.clone(), self.feature_names.clone())
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.feature_names)?;
        for r in self.values.rows_iter() {
            wtr.write_record(r.iter().map(|v| format_f64(*v)))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Defaults to 0.75·√p.
    pub kernel_width: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ExplainMethod {
    /// Interventional closed form for linear models, path-dependent
    /// TreeSHAP for tree models.
    ShapAuto,
    /// Gaussian conditional expectations; linear models only.
    ShapObservational,
    Lime(LimeConfig),
}

fn require_linear(m: &Predictor) -> Result<(f64, &[f64])> {
    m.linear().ok_or_else(|| {
        Error::UnsupportedModel(format!("{} is not a linear model", m.spec.name()))
    })
}

fn check_row(x: &[f64], p: usize) -> Result<()> {
    if x.len() != p {
        return Err(Error::shape(format!("row of length {p}"), x.len()));
    }
    Ok(())
}

fn check_background(bg: &BackgroundStats, p: usize) -> Result<()> {
    if bg.p() != p {
        return Err(Error::shape(format!("background with {p} features"), bg.p()));
    }
    Ok(())
}

/// S_j = β_j (x_j − μ_j).
pub fn shap_linear_interventional(m: &Predictor, x: &[f64], bg: &BackgroundStats) -> Result<Vec<f64>> {
    let (_, beta) = require_linear(m)?;
    check_row(x, beta.len())?;
    check_background(bg, beta.len())?;
    Ok(beta
        .iter()
        .zip(x)
        .zip(&bg.means)
        .map(|((b, v), mu)| b * (v - mu))
        .collect())
}

/// Shapley values of the conditional-expectation game under a Gaussian
/// feature model, by exact summation over all coalitions.
pub fn shap_linear_observational_gaussian(
    m: &Predictor,
    x: &[f64],
    bg: &BackgroundStats,
) -> Result<Vec<f64>> {
    let (intercept, beta) = require_linear(m)?;
    let p = beta.len();
    check_row(x, p)?;
    check_background(bg, p)?;
    if p > MAX_OBSERVATIONAL_FEATURES {
        return Err(Error::Size(format!(
            "observational SHAP enumerates 2^p coalitions; p={p} exceeds {MAX_OBSERVATIONAL_FEATURES}"
        )));
    }
    let values = (0..1u32 << p)
        .map(|mask| gaussian_conditional_value(intercept, beta, x, bg, mask))
        .collect::<Result<Vec<f64>>>()?;
    Ok(shapley_from_table(&values, p))
}

/// val(T) = β₀ + Σ_{i∈T} β_i x_i + Σ_{i∉T} β_i E[X_i | X_T = x_T].
pub fn gaussian_conditional_value(
    intercept: f64,
    beta: &[f64],
    x: &[f64],
    bg: &BackgroundStats,
    mask: u32,
) -> Result<f64> {
    let p = beta.len();
    let cov = |a: usize, b: usize| bg.covariance[a * p + b];
    let inside: Vec<usize> = (0..p).filter(|&j| mask >> j & 1 == 1).collect();
    let outside: Vec<usize> = (0..p).filter(|&j| mask >> j & 1 == 0).collect();
    let mut val = intercept + inside.iter().map(|&j| beta[j] * x[j]).sum::<f64>();
    if inside.is_empty() {
        return Ok(val + outside.iter().map(|&j| beta[j] * bg.means[j]).sum::<f64>());
    }
    let k = inside.len();
    let s_tt = DMatrix::from_fn(k, k, |a, b| {
        cov(inside[a], inside[b]) + if a == b { COVARIANCE_JITTER } else { 0.0 }
    });
    let dev = DVector::from_fn(k, |a, _| x[inside[a]] - bg.means[inside[a]]);
    let solved = s_tt
        .cholesky()
        .ok_or_else(|| Error::Numeric("conditional covariance is not positive definite".into()))?
        .solve(&dev);
    for &i in &outside {
        let shift: f64 = inside.iter().enumerate().map(|(a, &t)| cov(i, t) * solved[a]).sum();
        val += beta[i] * (bg.means[i] + shift);
    }
    if !val.is_finite() {
        return Err(Error::Numeric("conditional expectation is not finite".into()));
    }
    Ok(val)
}

/// Shapley weight |T|!(p−|T|−1)!/p! for a coalition of size `s`.
fn shapley_weight(p: usize, s: usize) -> f64 {
    // 1 / (p · C(p−1, s))
    let mut binom = 1.0;
    for i in 0..s {
        binom = binom * (p - 1 - i) as f64 / (i + 1) as f64;
    }
    1.0 / (p as f64 * binom)
}

/// Shapley values from a table of coalition values indexed by bitmask.
fn shapley_from_table(values: &[f64], p: usize) -> Vec<f64> {
    let weights: Vec<f64> = (0..p.max(1)).map(|s| shapley_weight(p, s)).collect();
    (0..p)
        .map(|j| {
            let bit = 1usize << j;
            (0..values.len())
                .filter(|mask| mask & bit == 0)
                .map(|mask| weights[mask.count_ones() as usize] * (values[mask | bit] - values[mask]))
                .sum()
        })
        .collect()
}

/// Exact Shapley values of the game `value_fn` over `p` players.
///
/// Coalitions are passed as bitmasks: bit j set means player j is in the
/// coalition.
pub fn shap_exact_enumeration(value_fn: impl Fn(u32) -> f64, p: usize) -> Result<Vec<f64>> {
    if p > MAX_ENUMERATION_FEATURES {
        return Err(Error::Size(format!(
            "exact enumeration supports at most {MAX_ENUMERATION_FEATURES} players, got {p}"
        )));
    }
    let values: Vec<f64> = (0..1u32 << p).map(value_fn).collect();
    Ok(shapley_from_table(&values, p))
}

/// Interventional game: the raw score averaged over background rows with
/// the coalition's features fixed to `x`.
pub fn interventional_value(m: &Predictor, x: &[f64], background: &Matrix, mask: u32) -> f64 {
    let mut z = vec![0.0; x.len()];
    let total: f64 = background
        .rows_iter()
        .map(|r| {
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = if mask >> j & 1 == 1 { x[j] } else { r[j] };
            }
            m.raw_row(&z)
        })
        .sum();
    total / background.nrows() as f64
}

/// Tree game: splits on coalition features follow `x`, others average their
/// children weighted by training cover.
pub fn tree_conditional_value(tree: &Tree, x: &[f64], mask: u32) -> f64 {
    fn go(t: &Tree, k: usize, x: &[f64], mask: u32) -> f64 {
        let node = &t.nodes[k];
        match &node.split {
            None => node.value,
            Some(s) if mask >> s.feature & 1 == 1 => {
                go(t, if x[s.feature] < s.threshold { s.left } else { s.right }, x, mask)
            }
            Some(s) => {
                let (cl, cr) = (t.nodes[s.left].cover, t.nodes[s.right].cover);
                (cl * go(t, s.left, x, mask) + cr * go(t, s.right, x, mask)) / (cl + cr)
            }
        }
    }
    go(tree, 0, x, mask)
}

/// Cover-weighted mean leaf value.
pub fn tree_expected_value(tree: &Tree) -> f64 {
    tree_conditional_value(tree, &[], 0)
}

fn validate_for_shap(tree: &Tree, p: usize) -> Result<()> {
    tree.validate(p)?;
    if let Some(k) = tree.nodes.iter().position(|n| !(n.cover > 0.0)) {
        return Err(Error::MalformedTree(format!("node {k} has zero cover")));
    }
    Ok(())
}

/// Path-dependent TreeSHAP summed over the trees of `m`.
pub fn shap_tree_path_dependent(m: &Predictor, x: &[f64]) -> Result<Vec<f64>> {
    let (_, trees) = m
        .trees()
        .ok_or_else(|| Error::UnsupportedModel(format!("{} is not a tree model", m.spec.name())))?;
    check_row(x, m.p())?;
    let mut phi = vec![0.0; m.p()];
    for tree in trees {
        validate_for_shap(tree, m.p())?;
        tree_shap(tree, x, &mut phi);
    }
    Ok(phi)
}

#[derive(Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

fn tree_shap(tree: &Tree, x: &[f64], phi: &mut [f64]) {
    recurse(tree, 0, x, phi, Vec::new(), 1.0, 1.0, None);
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    k: usize,
    x: &[f64],
    phi: &mut [f64],
    mut path: Vec<PathElement>,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) {
    extend_path(&mut path, zero_fraction, one_fraction, feature);
    let node = &tree.nodes[k];
    let Some(split) = &node.split else {
        for i in 1..path.len() {
            let w = unwound_path_sum(&path, i);
            let el = path[i];
            phi[el.feature.expect("only the root element lacks a feature")] +=
                w * (el.one_fraction - el.zero_fraction) * node.value;
        }
        return;
    };
    let (hot, cold) = if x[split.feature] < split.threshold {
        (split.left, split.right)
    } else {
        (split.right, split.left)
    };
    let cover = node.cover;
    let mut incoming_zero = 1.0;
    let mut incoming_one = 1.0;
    if let Some(idx) = path.iter().position(|e| e.feature == Some(split.feature)) {
        incoming_zero = path[idx].zero_fraction;
        incoming_one = path[idx].one_fraction;
        unwind_path(&mut path, idx);
    }
    recurse(
        tree,
        hot,
        x,
        phi,
        path.clone(),
        tree.nodes[hot].cover / cover * incoming_zero,
        incoming_one,
        Some(split.feature),
    );
    recurse(
        tree,
        cold,
        x,
        phi,
        path,
        tree.nodes[cold].cover / cover * incoming_zero,
        0.0,
        Some(split.feature),
    );
}

fn extend_path(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: Option<usize>) {
    let d = path.len();
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        weight: if d == 0 { 1.0 } else { 0.0 },
    });
    let denom = (d + 1) as f64;
    for i in (0..d).rev() {
        path[i + 1].weight += one_fraction * path[i].weight * (i + 1) as f64 / denom;
        path[i].weight = zero_fraction * path[i].weight * (d - i) as f64 / denom;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, idx: usize) {
    let d = path.len() - 1;
    let one = path[idx].one_fraction;
    let zero = path[idx].zero_fraction;
    let denom = (d + 1) as f64;
    let mut next_one = path[d].weight;
    for i in (0..d).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next_one * denom / ((i + 1) as f64 * one);
            next_one = tmp - path[i].weight * zero * (d - i) as f64 / denom;
        } else {
            path[i].weight = path[i].weight * denom / (zero * (d - i) as f64);
        }
    }
    for i in idx..d {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

fn unwound_path_sum(path: &[PathElement], idx: usize) -> f64 {
    let d = path.len() - 1;
    let one = path[idx].one_fraction;
    let zero = path[idx].zero_fraction;
    let denom = (d + 1) as f64;
    let mut next_one = path[d].weight;
    let mut total = 0.0;
    for i in (0..d).rev() {
        if one != 0.0 {
            let tmp = next_one * denom / ((i + 1) as f64 * one);
            total += tmp;
            next_one = path[i].weight - tmp * zero * (d - i) as f64 / denom;
        } else {
            total += path[i].weight / zero / ((d - i) as f64 / denom);
        }
    }
    total
}

/// Local linear surrogate fitted to Gaussian perturbations around `x`.
///
/// Perturbations use the background per-feature standard deviations;
/// samples are weighted by exp(−d²/w²) with d the standardized distance to
/// `x`. Attributions are coefficient_j·(x_j − μ_j). Features with zero
/// background spread are never perturbed and get attribution 0.
pub fn lime_tabular(m: &Predictor, x: &[f64], bg: &BackgroundStats, cfg: &LimeConfig) -> Result<Vec<f64>> {
    let p = m.p();
    check_row(x, p)?;
    check_background(bg, p)?;
    if cfg.n_samples < p + 2 {
        return Err(Error::Domain(format!("LIME needs at least p+2={} samples, got {}", p + 2, cfg.n_samples)));
    }
    let width = cfg.kernel_width.unwrap_or(0.75 * (p as f64).sqrt());
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Domain(format!("kernel width must be positive, got {width}")));
    }
    let active: Vec<usize> = (0..p).filter(|&j| bg.std(j) > 0.0).collect();
    let mut rng = SeededRng::new(cfg.seed);
    let mut design = Vec::with_capacity(cfg.n_samples * active.len());
    let mut target = Vec::with_capacity(cfg.n_samples);
    let mut weights = Vec::with_capacity(cfg.n_samples);
    let mut z = x.to_vec();
    for _ in 0..cfg.n_samples {
        let mut d2 = 0.0;
        for &j in &active {
            let e = rng.normal();
            z[j] = x[j] + bg.std(j) * e;
            d2 += e * e;
            design.push(z[j]);
        }
        target.push(m.raw_row(&z));
        weights.push((-d2 / (width * width)).exp());
    }
    let design = Matrix::new(cfg.n_samples, active.len(), design)?;
    let (_, coef) = weighted_least_squares(&design, &target, Some(&weights), 0.0)
        .ok_or_else(|| Error::Numeric("LIME weighted design is singular".into()))?;
    let mut out = vec![0.0; p];
    for (c, &j) in coef.iter().zip(&active) {
        out[j] = c * (x[j] - bg.means[j]);
    }
    Ok(out)
}

/// Expected raw score used as the base of the explanations.
pub fn base_value(m: &Predictor, bg: &BackgroundStats) -> f64 {
    if let Some((intercept, beta)) = m.linear() {
        return intercept + beta.iter().zip(&bg.means).map(|(b, mu)| b * mu).sum::<f64>();
    }
    if let Some((base, trees)) = m.trees() {
        return base + trees.iter().map(tree_expected_value).sum::<f64>();
    }
    unreachable!("every predictor is linear or tree-based")
}

/// Explains one row with the requested method. `row_index` only feeds the
/// per-row LIME seed.
pub fn explain_row(
    m: &Predictor,
    x: &[f64],
    method: &ExplainMethod,
    bg: &BackgroundStats,
    row_index: usize,
) -> Result<Vec<f64>> {
    match method {
        ExplainMethod::ShapAuto if m.linear().is_some() => shap_linear_interventional(m, x, bg),
        ExplainMethod::ShapAuto => shap_tree_path_dependent(m, x),
        ExplainMethod::ShapObservational => shap_linear_observational_gaussian(m, x, bg),
        ExplainMethod::Lime(cfg) => {
            let cfg = LimeConfig {
                seed: derive_seed(cfg.seed, row_index as u64),
                ..cfg.clone()
            };
            lime_tabular(m, x, bg, &cfg)
        }
    }
}

/// Attribution matrix of `d` under `m`, rows computed in parallel.
pub fn explain_dataset(
    m: &Predictor,
    d: &Dataset,
    method: &ExplainMethod,
    bg: &BackgroundStats,
) -> Result<ExplanationMatrix> {
    if d.feature_names() != m.feature_names.as_slice() {
        return Err(Error::Schema(format!(
            "dataset features [{}] do not match model features [{}]",
            d.feature_names().join(","),
            m.feature_names.join(",")
        )));
    }
    check_background(bg, m.p())?;
    if let Some((_, trees)) = m.trees() {
        for t in trees {
            validate_for_shap(t, m.p())?;
        }
    }
    let rows: Vec<Vec<f64>> = (0..d.n())
        .into_par_iter()
        .map(|i| explain_row(m, d.x().row(i), method, bg, i))
        .collect::<Result<_>>()?;
    let base = match method {
        ExplainMethod::Lime(_) => {
            let raw = m.predict_raw(&bg.rows)?;
            raw.iter().sum::<f64>() / raw.len() as f64
        }
        _ => base_value(m, bg),
    };
    Ok(ExplanationMatrix {
        values: if rows.is_empty() { Matrix::zeros(0, m.p()) } else { Matrix::from_rows(&rows)? },
        feature_names: m.feature_names.clone(),
        base_value: base,
    })
}
