//! Model zoo: linear, logistic, CART and gradient-boosted trees.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::{solve_spd, weighted_least_squares, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Ols,
    Ridge {
        lambda: f64,
    },
    Logistic {
        lambda: f64,
        max_iter: usize,
        tol: f64,
    },
    Tree {
        max_depth: usize,
        min_leaf: usize,
        task: Task,
    },
    Gbdt {
        n_trees: usize,
        learning_rate: f64,
        max_depth: usize,
        task: Task,
    },
}

/// Minimum rows per leaf inside boosted trees.
const GBDT_MIN_LEAF: usize = 1;

impl ModelSpec {
    pub fn ridge() -> Self {
        ModelSpec::Ridge { lambda: 1e-6 }
    }

    pub fn logistic() -> Self {
        ModelSpec::Logistic {
            lambda: 1.0,
            max_iter: 1000,
            tol: 1e-8,
        }
    }

    pub fn tree(task: Task) -> Self {
        ModelSpec::Tree {
            max_depth: 6,
            min_leaf: 5,
            task,
        }
    }

    pub fn gbdt(task: Task) -> Self {
        ModelSpec::Gbdt {
            n_trees: 100,
            learning_rate: 0.1,
            max_depth: 3,
            task,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Ols => "ols",
            ModelSpec::Ridge { .. } => "ridge",
            ModelSpec::Logistic { .. } => "logistic",
            ModelSpec::Tree { .. } => "tree",
            ModelSpec::Gbdt { .. } => "gbdt",
        }
    }

    pub fn is_classifier(&self) -> bool {
        matches!(
            self,
            ModelSpec::Logistic { .. }
                | ModelSpec::Tree { task: Task::Classification, .. }
                | ModelSpec::Gbdt { task: Task::Classification, .. }
        )
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, ModelSpec::Ols | ModelSpec::Ridge { .. } | ModelSpec::Logistic { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        match *self {
            ModelSpec::Ols => Ok(()),
            ModelSpec::Ridge { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                bad(format!("ridge lambda must be finite and >= 0, got {lambda}"))
            }
            ModelSpec::Logistic { lambda, max_iter, tol } => {
                if !(lambda >= 0.0 && lambda.is_finite()) || max_iter == 0 || !(tol > 0.0) {
                    bad(format!(
                        "logistic needs lambda >= 0, max_iter >= 1, tol > 0 (got {lambda}, {max_iter}, {tol})"
                    ))
                } else {
                    Ok(())
                }
            }
            ModelSpec::Tree { max_depth, min_leaf, .. } if max_depth == 0 || min_leaf == 0 => {
                bad("tree max_depth and min_leaf must be at least 1".into())
            }
            ModelSpec::Gbdt {
                n_trees,
                learning_rate,
                max_depth,
                ..
            } if n_trees == 0 || max_depth == 0 || !(learning_rate > 0.0 && learning_rate.is_finite()) => {
                bad("gbdt needs n_trees >= 1, max_depth >= 1 and a positive learning rate".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// Rows with `x[feature] < threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub split: Option<Split>,
    /// Leaf output; for internal nodes the cover-weighted mean of its leaves.
    pub value: f64,
    /// Number of training rows reaching the node.
    pub cover: f64,
}

/// Binary tree stored as a node arena with the root at index 0 and every
/// child index greater than its parent's.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            let node = &self.nodes[k];
            match &node.split {
                None => return node.value,
                Some(s) => k = if x[s.feature] < s.threshold { s.left } else { s.right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            match &t.nodes[k].split {
                None => 0,
                Some(s) => 1 + go(t, s.left).max(go(t, s.right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            go(self, 0)
        }
    }

    /// Features used by at least one split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| n.split.as_ref().map(|s| s.feature))
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::MalformedTree("tree has no nodes".into()));
        }
        for (k, node) in self.nodes.iter().enumerate() {
            if !node.value.is_finite() || !(node.cover >= 0.0) {
                return Err(Error::MalformedTree(format!("node {k} has a non-finite value or cover")));
            }
            if let Some(s) = &node.split {
                if s.feature >= p {
                    return Err(Error::MalformedTree(format!("node {k} splits on missing feature {}", s.feature)));
                }
                if s.left <= k || s.right <= k || s.left >= self.nodes.len() || s.right >= self.nodes.len() || s.left == s.right {
                    return Err(Error::MalformedTree(format!("node {k} has invalid children")));
                }
                if !(node.cover > 0.0) {
                    return Err(Error::MalformedTree(format!("internal node {k} has zero cover")));
                }
                let sum = self.nodes[s.left].cover + self.nodes[s.right].cover;
                if (sum - node.cover).abs() > 1e-9 * node.cover.max(1.0) {
                    return Err(Error::MalformedTree(format!("covers inconsistent at node {k}")));
                }
                if !s.threshold.is_finite() {
                    return Err(Error::MalformedTree(format!("node {k} has a non-finite threshold")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Parameters {
    Linear { intercept: f64, coefficients: Vec<f64> },
    Tree { tree: Tree },
    Ensemble { base_score: f64, trees: Vec<Tree> },
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub parameters: Parameters,
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Predictor {
    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    /// Score on the scale the explainers work with: the linear predictor
    /// for linear models (log-odds for logistic), the margin for boosted
    /// trees, the leaf value for single trees.
    pub fn raw_row(&self, x: &[f64]) -> f64 {
        match &self.parameters {
            Parameters::Linear { intercept, coefficients } => {
                intercept + coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
            }
            Parameters::Tree { tree } => tree.predict_row(x),
            Parameters::Ensemble { base_score, trees } => {
                base_score + trees.iter().map(|t| t.predict_row(x)).sum::<f64>()
            }
        }
    }

    /// Prediction on the response scale (probabilities for classifiers).
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let raw = self.raw_row(x);
        if self.has_logit_link() {
            sigmoid(raw)
        } else {
            raw
        }
    }

    fn has_logit_link(&self) -> bool {
        matches!(
            self.spec,
            ModelSpec::Logistic { .. } | ModelSpec::Gbdt { task: Task::Classification, .. }
        )
    }

    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.ncols() != self.p() {
            return Err(Error::shape(format!("{} columns", self.p()), x.ncols()));
        }
        Ok(())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_width(x)?;
        Ok(x.rows_iter().map(|r| self.predict_row(r)).collect())
    }

    pub fn predict_raw(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_width(x)?;
        Ok(x.rows_iter().map(|r| self.raw_row(r)).collect())
    }

    pub fn linear(&self) -> Option<(f64, &[f64])> {
        match &self.parameters {
            Parameters::Linear { intercept, coefficients } => Some((*intercept, coefficients)),
            _ => None,
        }
    }

    /// Trees with the additive offset they sit on (0 for a single tree).
    pub fn trees(&self) -> Option<(f64, &[Tree])> {
        match &self.parameters {
            Parameters::Tree { tree } => Some((0.0, std::slice::from_ref(tree))),
            Parameters::Ensemble { base_score, trees } => Some((*base_score, trees)),
            Parameters::Linear { .. } => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Predictor = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!("unsupported model format version {}", m.format_version)));
        }
        m.spec.validate()?;
        match &m.parameters {
            Parameters::Linear { coefficients, .. } if coefficients.len() != m.p() => {
                return Err(Error::shape(format!("{} coefficients", m.p()), coefficients.len()));
            }
            _ => {}
        }
        if let Some((_, trees)) = m.trees() {
            for t in trees {
                t.validate(m.p())?;
            }
        }
        Ok(m)
    }
}

pub fn fit(spec: &ModelSpec, d: &Dataset) -> Result<Predictor> {
    spec.validate()?;
    let y = d.require_target()?;
    if d.n() < 2 {
        return Err(Error::Domain(format!("need at least 2 rows to fit, got {}", d.n())));
    }
    if d.p() == 0 {
        return Err(Error::Domain("need at least one feature".into()));
    }
    if spec.is_classifier() && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Domain(format!("{} needs a binary 0/1 target", spec.name())));
    }
    let x = d.x();
    let parameters = match *spec {
        ModelSpec::Ols => {
            let (intercept, coefficients) =
                weighted_least_squares(x, y, None, 0.0).ok_or(Error::RankDeficient)?;
            Parameters::Linear { intercept, coefficients }
        }
        ModelSpec::Ridge { lambda } => {
            let (intercept, coefficients) = weighted_least_squares(x, y, None, lambda).ok_or(if lambda == 0.0 {
                Error::RankDeficient
            } else {
                Error::Numeric("ridge normal equations not positive definite".into())
            })?;
            Parameters::Linear { intercept, coefficients }
        }
        ModelSpec::Logistic { lambda, max_iter, tol } => {
            let fitted = fit_logistic(x, y, lambda, max_iter, tol)?;
            Parameters::Linear {
                intercept: fitted.intercept,
                coefficients: fitted.coefficients,
            }
        }
        ModelSpec::Tree { max_depth, min_leaf, .. } => {
            let sorted = presort(x);
            let leaf_mean = |rows: &[usize]| rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64;
            let tree = grow_tree(x, y, &sorted, max_depth, min_leaf, &leaf_mean);
            Parameters::Tree { tree }
        }
        ModelSpec::Gbdt {
            n_trees,
            learning_rate,
            max_depth,
            task,
        } => {
            let (base_score, trees) = fit_gbdt(x, y, n_trees, learning_rate, max_depth, task);
            Parameters::Ensemble { base_score, trees }
        }
    };
    Ok(Predictor {
        format_version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        feature_names: d.feature_names().to_vec(),
        parameters,
    })
}

struct LogisticFit {
    intercept: f64,
    coefficients: Vec<f64>,
    /// Objective value after each accepted iterate, starting at the origin.
    #[cfg_attr(not(test), allow(dead_code))]
    losses: Vec<f64>,
}

/// log(1 + e^t) without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Damped Newton on Σ NLL + ½λ‖w‖² with an unpenalized intercept.
fn fit_logistic(x: &Matrix, y: &[f64], lambda: f64, max_iter: usize, tol: f64) -> Result<LogisticFit> {
    let n = x.nrows();
    let p = x.ncols();
    let dim = p + 1;
    // theta = (intercept, w)
    let mut theta = vec![0.0; dim];
    let margin = |theta: &[f64], row: &[f64]| theta[0] + theta[1..].iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
    let objective = |theta: &[f64]| -> f64 {
        let nll: f64 = (0..n)
            .map(|i| {
                let t = margin(theta, x.row(i));
                softplus(t) - y[i] * t
            })
            .sum();
        nll + 0.5 * lambda * theta[1..].iter().map(|w| w * w).sum::<f64>()
    };
    let mut loss = objective(&theta);
    let mut losses = vec![loss];
    for _ in 0..max_iter {
        let mut grad = vec![0.0; dim];
        let mut hess = vec![0.0; dim * dim];
        for i in 0..n {
            let row = x.row(i);
            let mu = sigmoid(margin(&theta, row));
            let r = mu - y[i];
            let w = mu * (1.0 - mu);
            grad[0] += r;
            hess[0] += w;
            for a in 0..p {
                grad[a + 1] += r * row[a];
                hess[a + 1] += w * row[a];
                for b in a..p {
                    hess[(a + 1) * dim + b + 1] += w * row[a] * row[b];
                }
            }
        }
        for a in 1..dim {
            grad[a] += lambda * theta[a];
            hess[a * dim + a] += lambda;
            hess[a * dim] = hess[a];
            for b in 1..a {
                hess[a * dim + b] = hess[b * dim + a];
            }
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm <= tol {
            break;
        }
        let step = match solve_spd(&hess, dim, &grad) {
            Some(s) => s,
            None => {
                // flat curvature (e.g. saturated separable data): add a small ridge
                let mut h = hess.clone();
                let scale = (0..dim).map(|k| hess[k * dim + k]).fold(1e-12, f64::max);
                for k in 0..dim {
                    h[k * dim + k] += 1e-8 * scale;
                }
                solve_spd(&h, dim, &grad).ok_or_else(|| Error::Numeric("logistic Hessian is singular".into()))?
            }
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let l = objective(&cand);
            if l < loss {
                theta = cand;
                loss = l;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no representable decrease left
            break;
        }
        losses.push(loss);
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("logistic coefficients diverged".into()));
    }
    Ok(LogisticFit {
        intercept: theta[0],
        coefficients: theta[1..].to_vec(),
        losses,
    })
}

/// Per-feature row orders, ascending by value with ties by row index.
fn presort(x: &Matrix) -> Vec<Vec<usize>> {
    (0..x.ncols())
        .map(|j| {
            let mut idx: Vec<usize> = (0..x.nrows()).collect();
            idx.sort_by(|&a, &b| x.get(a, j).total_cmp(&x.get(b, j)));
            idx
        })
        .collect()
}

struct Grower<'a> {
    x: &'a Matrix,
    target: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    leaf_value: &'a dyn Fn(&[usize]) -> f64,
    nodes: Vec<Node>,
    goes_left: Vec<bool>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Greedy CART growth minimizing squared error of `target`.
///
/// For 0/1 targets the Gini decrease of a split is exactly twice its
/// squared-error decrease, so the same search serves classification trees.
/// Leaf outputs come from `leaf_value` applied to the leaf's training rows.
fn grow_tree(
    x: &Matrix,
    target: &[f64],
    sorted: &[Vec<usize>],
    max_depth: usize,
    min_leaf: usize,
    leaf_value: &dyn Fn(&[usize]) -> f64,
) -> Tree {
    let mut g = Grower {
        x,
        target,
        max_depth,
        min_leaf,
        leaf_value,
        nodes: Vec::new(),
        goes_left: vec![false; x.nrows()],
    };
    g.grow(sorted.to_vec(), 0);
    Tree { nodes: g.nodes }
}

impl Grower<'_> {
    fn grow(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let rows = &sorted[0];
        let id = self.nodes.len();
        self.nodes.push(Node {
            split: None,
            value: 0.0,
            cover: rows.len() as f64,
        });
        let best = if depth < self.max_depth && rows.len() >= 2 * self.min_leaf {
            self.best_split(&sorted)
        } else {
            None
        };
        let Some(best) = best else {
            let mut leaf_rows = rows.clone();
            leaf_rows.sort_unstable();
            self.nodes[id].value = (self.leaf_value)(&leaf_rows);
            return id;
        };
        for &i in rows {
            self.goes_left[i] = self.x.get(i, best.feature) < best.threshold;
        }
        let (left, right): (Vec<Vec<usize>>, Vec<Vec<usize>>) = sorted
            .into_iter()
            .map(|order| order.into_iter().partition(|&i| self.goes_left[i]))
            .unzip();
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        let (cl, cr) = (self.nodes[l].cover, self.nodes[r].cover);
        self.nodes[id].value = (cl * self.nodes[l].value + cr * self.nodes[r].value) / (cl + cr);
        self.nodes[id].split = Some(Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        });
        id
    }

    fn best_split(&self, sorted: &[Vec<usize>]) -> Option<Candidate> {
        let m = sorted[0].len();
        let total: f64 = sorted[0].iter().map(|&i| self.target[i]).sum();
        let parent = total * total / m as f64;
        let mut best: Option<Candidate> = None;
        for (j, order) in sorted.iter().enumerate() {
            let mut left_sum = 0.0;
            for k in 1..m {
                left_sum += self.target[order[k - 1]];
                if k < self.min_leaf || m - k < self.min_leaf {
                    continue;
                }
                let a = self.x.get(order[k - 1], j);
                let b = self.x.get(order[k], j);
                if a == b {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / k as f64 + right_sum * right_sum / (m - k) as f64 - parent;
                let better = match &best {
                    None => gain > 1e-12 * parent.abs().max(1e-300),
                    Some(c) => gain > c.gain + 1e-12 * c.gain.abs(),
                };
                if better {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold <= a {
                        threshold = b;
                    }
                    best = Some(Candidate {
                        gain,
                        feature: j,
                        threshold,
                    });
                }
            }
        }
        best.filter(|c| c.gain > 0.0)
    }
}

fn fit_gbdt(
    x: &Matrix,
    y: &[f64],
    n_trees: usize,
    learning_rate: f64,
    max_depth: usize,
    task: Task,
) -> (f64, Vec<Tree>) {
    let n = y.len();
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let base = match task {
        Task::Regression => mean_y,
        Task::Classification => {
            let p = mean_y.clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        }
    };
    let sorted = presort(x);
    let mut f = vec![base; n];
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let (residual, hess): (Vec<f64>, Vec<f64>) = match task {
            Task::Regression => (y.iter().zip(&f).map(|(a, b)| a - b).collect(), vec![1.0; n]),
            Task::Classification => y
                .iter()
                .zip(&f)
                .map(|(a, b)| {
                    let mu = sigmoid(*b);
                    (a - mu, mu * (1.0 - mu))
                })
                .unzip(),
        };
        let leaf = |rows: &[usize]| {
            let g: f64 = rows.iter().map(|&i| residual[i]).sum();
            let h: f64 = rows.iter().map(|&i| hess[i]).sum();
            if h > 1e-12 {
                learning_rate * g / h
            } else {
                0.0
            }
        };
        let tree = grow_tree(x, &residual, &sorted, max_depth, GBDT_MIN_LEAF, &leaf);
        for (i, fi) in f.iter_mut().enumerate() {
            *fi += tree.predict_row(x.row(i));
        }
        trees.push(tree);
    }
    (base, trees)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn data(cols: &[Vec<f64>], y: Vec<f64>) -> Dataset {
        Dataset::from_columns(cols).unwrap().with_target("y", y).unwrap()
    }

    #[test]
    fn ols_exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let m = fit(&ModelSpec::Ols, &data(&[x], y)).unwrap();
        let (b0, b) = m.linear().unwrap();
        assert!((b0 - 1.0).abs() < 1e-8 && (b[0] - 2.0).abs() < 1e-8);
        let pred = m.predict(&Matrix::from_rows(&[[3.0]]).unwrap()).unwrap();
        assert!((pred[0] - 7.0).abs() < 1e-8);
    }

    #[test]
    fn ols_rank_deficient() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let d = data(&[x.clone(), x.clone()], x);
        assert!(matches!(fit(&ModelSpec::Ols, &d), Err(Error::RankDeficient)));
        assert!(fit(&ModelSpec::Ridge { lambda: 1.0 }, &d).is_ok());
    }

    #[test]
    fn ols_residuals_orthogonal() {
        let mut rng = SeededRng::new(3);
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..200).map(|_| rng.normal()).collect()).collect();
        let y: Vec<f64> = (0..200).map(|i| cols[0][i] - 0.5 * cols[2][i] + rng.normal()).collect();
        let d = data(&cols, y.clone());
        let m = fit(&ModelSpec::Ols, &d).unwrap();
        let pred = m.predict(d.x()).unwrap();
        let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        assert!(resid.iter().sum::<f64>().abs() < 1e-6);
        for c in &cols {
            assert!(c.iter().zip(&resid).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-6);
        }
    }

    #[test]
    fn stump_separates() {
        let x: Vec<f64> = (-10..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|&v| f64::from(u8::from(v > 0.0))).collect();
        let spec = ModelSpec::Tree {
            max_depth: 1,
            min_leaf: 1,
            task: Task::Classification,
        };
        let m = fit(&spec, &data(&[x.clone()], y.clone())).unwrap();
        let pred = m.predict(&Matrix::from_columns(&[x]).unwrap()).unwrap();
        assert_eq!(pred, y);
        let p = m.predict(&Matrix::from_rows(&[[-5.0], [5.0]]).unwrap()).unwrap();
        assert_eq!(p, vec![0.0, 1.0]);
    }

    #[test]
    fn gbdt_constant_target() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let spec = ModelSpec::Gbdt {
            n_trees: 1,
            learning_rate: 1.0,
            max_depth: 3,
            task: Task::Regression,
        };
        let m = fit(&spec, &data(&[x.clone()], vec![4.25; 20])).unwrap();
        assert!(m.predict(&Matrix::from_columns(&[x]).unwrap()).unwrap().iter().all(|&v| v == 4.25));
    }

    #[test]
    fn classification_requires_binary_target() {
        let d = data(&[vec![0.0, 1.0, 2.0]], vec![0.0, 1.0, 2.0]);
        assert!(matches!(fit(&ModelSpec::logistic(), &d), Err(Error::Domain(_))));
    }

    fn logistic_data(seed: u64, n: usize) -> Dataset {
        let mut rng = SeededRng::new(seed);
        let x1: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let y = (0..n)
            .map(|i| f64::from(u8::from(rng.bernoulli(sigmoid(1.5 * x1[i] - x2[i] + 0.3)))))
            .collect();
        data(&[x1, x2], y)
    }

    #[test]
    fn logistic_loss_decreases_and_converges() {
        let d = logistic_data(8, 500);
        let fitted = fit_logistic(d.x(), d.y().unwrap(), 1.0, 1000, 1e-8).unwrap();
        assert!(fitted.losses.windows(2).all(|w| w[1] <= w[0]));
        assert!(fitted.coefficients[0] > 1.0 && fitted.coefficients[1] < -0.5);
    }

    #[test]
    fn gbdt_loss_non_increasing() {
        let mut rng = SeededRng::new(4);
        let x: Vec<f64> = (0..300).map(|_| rng.normal()).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v + 0.1 * rng.normal()).collect();
        let d = data(&[x], y.clone());
        let mut prev = f64::INFINITY;
        for n_trees in [1, 5, 20, 50] {
            let spec = ModelSpec::Gbdt {
                n_trees,
                learning_rate: 0.1,
                max_depth: 3,
                task: Task::Regression,
            };
            let pred = fit(&spec, &d).unwrap().predict(d.x()).unwrap();
            let mse: f64 = y.iter().zip(&pred).map(|(a, b)| (a - b).powi(2)).sum();
            assert!(mse <= prev + 1e-9);
            prev = mse;
        }
    }

    #[test]
    fn json_round_trip() {
        let d = logistic_data(2, 200);
        for spec in [ModelSpec::logistic(), ModelSpec::tree(Task::Classification), ModelSpec::gbdt(Task::Classification)] {
            let m = fit(&spec, &d).unwrap();
            let back = Predictor::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back.predict(d.x()).unwrap(), m.predict(d.x()).unwrap());
        }
    }

    #[test]
    fn tampered_tree_is_rejected() {
        let d = logistic_data(2, 100);
        let mut m = fit(&ModelSpec::tree(Task::Regression), &d).unwrap();
        if let Parameters::Tree { tree } = &mut m.parameters {
            tree.nodes[0].cover += 3.0;
        }
        assert!(matches!(Predictor::from_json(&m.to_json().unwrap()), Err(Error::MalformedTree(_))));
    }

    proptest! {
        #[test]
        fn tree_covers_consistent(seed in any::<u64>(), depth in 1usize..6, min_leaf in 1usize..8) {
            let mut rng = SeededRng::new(seed);
            let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..80).map(|_| (rng.normal() * 3.0).round()).collect()).collect();
            let y: Vec<f64> = (0..80).map(|_| rng.normal()).collect();
            let spec = ModelSpec::Tree { max_depth: depth, min_leaf, task: Task::Regression };
            let m = fit(&spec, &data(&cols, y)).unwrap();
            let (_, trees) = m.trees().unwrap();
            prop_assert!(trees[0].validate(3).is_ok());
            prop_assert!(trees[0].depth() <= depth);
            prop_assert_eq!(trees[0].nodes[0].cover, 80.0);
            for node in &trees[0].nodes {
                if node.split.is_none() {
                    prop_assert!(node.cover >= min_leaf as f64);
                }
            }
        }
    }
}
