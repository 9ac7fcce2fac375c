//! Nonparametric two-sample statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    Greater,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub auc: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub alternative: Alternative,
}

impl TestResult {
    fn plain(statistic: f64, p_value: f64, alternative: Alternative) -> Self {
        Self {
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            auc: None,
            ci_low: None,
            ci_high: None,
            alternative,
        }
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson correlation; NaN when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Linear-interpolation quantile of already sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, q)
}

/// Midranks (1-based, ties averaged).
pub fn midranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        // positions i..j share the average of ranks i+1..=j
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn split_by_label(scores: &[f64], labels: &[u8]) -> Result<(Vec<f64>, Vec<f64>)> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!("{} labels", scores.len()), labels.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Domain("scores must be finite".into()));
    }
    let mut neg = Vec::new();
    let mut pos = Vec::new();
    for (&s, &l) in scores.iter().zip(labels) {
        match l {
            0 => neg.push(s),
            1 => pos.push(s),
            _ => return Err(Error::Domain("labels must be 0 or 1".into())),
        }
    }
    if neg.is_empty() || pos.is_empty() {
        return Err(Error::Domain("both label classes must be present".into()));
    }
    Ok((neg, pos))
}

/// Area under the ROC curve, ties counted one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (neg, pos) = split_by_label(scores, labels)?;
    Ok(auc_of_samples(&neg, &pos))
}

/// P(pos > neg) + ½P(pos = neg) from the rank sum of `pos`.
fn auc_of_samples(neg: &[f64], pos: &[f64]) -> f64 {
    let all: Vec<f64> = neg.iter().chain(pos).copied().collect();
    let ranks = midranks(&all);
    let (n0, n1) = (neg.len() as f64, pos.len() as f64);
    let rank_sum: f64 = ranks[neg.len()..].iter().sum();
    ((rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0)).clamp(0.0, 1.0)
}

/// Brunner–Munzel test of H0: P(X<Y) + ½P(X=Y) = ½.
///
/// `auc` in the result is the estimate of P(X<Y) + ½P(X=Y); with
/// `Alternative::Greater` the alternative is that `y` tends to exceed `x`.
/// The 95% interval uses the t quantile at the Satterthwaite df.
///
/// When both placement variances vanish the samples are either fully
/// separated (reported as statistic ±inf with the limiting p-value) or
/// indistinguishable, which is a `Degenerate` error.
pub fn brunner_munzel(x: &[f64], y: &[f64], alternative: Alternative) -> Result<TestResult> {
    let (nx, ny) = (x.len(), y.len());
    if nx < 2 || ny < 2 {
        return Err(Error::Domain("Brunner-Munzel needs at least 2 observations per sample".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("samples must be finite".into()));
    }
    let all: Vec<f64> = x.iter().chain(y).copied().collect();
    let rc = midranks(&all);
    let (rcx, rcy) = rc.split_at(nx);
    let rx = midranks(x);
    let ry = midranks(y);
    let (fx, fy) = (nx as f64, ny as f64);
    let mcx = mean(rcx);
    let mcy = mean(rcy);
    let mx = mean(&rx);
    let my = mean(&ry);
    let sx = rcx
        .iter()
        .zip(&rx)
        .map(|(c, r)| (c - r - mcx + mx).powi(2))
        .sum::<f64>()
        / (fx - 1.0);
    let sy = rcy
        .iter()
        .zip(&ry)
        .map(|(c, r)| (c - r - mcy + my).powi(2))
        .sum::<f64>()
        / (fy - 1.0);

    let estimate = ((mcy - (fy + 1.0) / 2.0) / fx).clamp(0.0, 1.0);
    let spread = fx * sx + fy * sy;
    if spread <= 0.0 {
        if estimate == 0.5 {
            return Err(Error::Degenerate(
                "samples share the same values; Brunner-Munzel is undefined".into(),
            ));
        }
        let up = estimate > 0.5;
        let p = match alternative {
            Alternative::Greater => f64::from(u8::from(!up)),
            Alternative::TwoSided => 0.0,
        };
        return Ok(TestResult {
            statistic: if up { f64::INFINITY } else { f64::NEG_INFINITY },
            p_value: p,
            auc: Some(estimate),
            ci_low: Some(estimate),
            ci_high: Some(estimate),
            alternative,
        });
    }
    let se = spread.sqrt() / (fx * fy);
    let statistic = (estimate - 0.5) / se;
    let df_num = spread * spread;
    let df_den = (fx * sx).powi(2) / (fx - 1.0) + (fy * sy).powi(2) / (fy - 1.0);
    let df = df_num / df_den;
    let t = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numeric(e.to_string()))?;
    let upper_tail = t.sf(statistic);
    let p_value = match alternative {
        Alternative::Greater => upper_tail,
        Alternative::TwoSided => 2.0 * upper_tail.min(1.0 - upper_tail),
    };
    let half = t.inverse_cdf(0.975) * se;
    Ok(TestResult {
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
        auc: Some(estimate),
        ci_low: Some((estimate - half).max(0.0)),
        ci_high: Some((estimate + half).min(1.0)),
        alternative,
    })
}

/// Brunner–Munzel on classifier scores: negatives against positives,
/// one-sided for AUC > ½.
pub fn auc_test_bm(scores: &[f64], labels: &[u8]) -> Result<TestResult> {
    let (neg, pos) = split_by_label(scores, labels)?;
    brunner_munzel(&neg, &pos, Alternative::Greater)
}

/// One-sided Mann–Whitney test of AUC > ½ by the normal approximation with
/// tie-corrected null variance (no continuity correction).
pub fn auc_test_asymptotic(scores: &[f64], labels: &[u8]) -> Result<TestResult> {
    let (neg, pos) = split_by_label(scores, labels)?;
    let (n0, n1) = (neg.len() as f64, pos.len() as f64);
    let area = auc_of_samples(&neg, &pos);
    let all: Vec<f64> = neg.iter().chain(&pos).copied().collect();
    let n = n0 + n1;
    let tie_term = tie_correction(&all);
    let var_u = n0 * n1 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var_u <= 0.0 {
        return Err(Error::Degenerate("all scores tied".into()));
    }
    let u = area * n0 * n1;
    let z = (u - n0 * n1 / 2.0) / var_u.sqrt();
    let p = Normal::standard().sf(z);
    Ok(TestResult {
        auc: Some(area),
        ..TestResult::plain(z, p, Alternative::Greater)
    })
}

/// Σ (t³ − t) over tie groups.
fn tie_correction(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < s.len() {
        let mut j = i + 1;
        while j < s.len() && s[j] == s[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        total += t * t * t - t;
        i = j;
    }
    total
}

/// One-sided normal-approximation binomial test of an accuracy above `null_rate`.
pub fn accuracy_test(correct: usize, n: usize, null_rate: f64) -> Result<TestResult> {
    if n == 0 || !(0.0..1.0).contains(&null_rate) {
        return Err(Error::Domain("accuracy test needs n > 0 and a null rate in [0,1)".into()));
    }
    let acc = correct as f64 / n as f64;
    let se = (null_rate * (1.0 - null_rate) / n as f64).sqrt();
    if se == 0.0 {
        return Err(Error::Degenerate("null accuracy rate is 0".into()));
    }
    let z = (acc - null_rate) / se;
    Ok(TestResult::plain(z, Normal::standard().sf(z), Alternative::Greater))
}

/// Two-sample Kolmogorov–Smirnov with the asymptotic Kolmogorov p-value at
/// effective size n₁n₂/(n₁+n₂).
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Domain("KS test needs nonempty samples".into()));
    }
    let d = ks_statistic(x, y);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let en = n * m / (n + m);
    Ok(TestResult::plain(d, kolmogorov_sf(en.sqrt() * d), Alternative::TwoSided))
}

pub fn ks_statistic(x: &[f64], y: &[f64]) -> f64 {
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // theta-function form converges fast for small arguments
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp())
            .sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

pub const PSI_FLOOR: f64 = 1e-6;
/// Default bin count for PSI.
pub const PSI_BINS: usize = 10;

/// Population stability index over quantile bins of `expected`.
///
/// Interior edges are the k/bins quantiles of `expected` (duplicates
/// dropped); a value equal to an edge falls in the lower bin.
pub fn psi(expected: &[f64], actual: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::Domain(format!("PSI needs at least 2 bins, got {bins}")));
    }
    if expected.is_empty() || actual.is_empty() {
        return Err(Error::Domain("PSI needs nonempty samples".into()));
    }
    let mut sorted = expected.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = (1..bins)
        .map(|k| quantile_sorted(&sorted, k as f64 / bins as f64))
        .collect();
    edges.dedup();
    let props = |v: &[f64]| {
        let mut counts = vec![0usize; edges.len() + 1];
        for x in v {
            counts[edges.partition_point(|e| e < x)] += 1;
        }
        counts
            .into_iter()
            .map(|c| (c as f64 / v.len() as f64).max(PSI_FLOOR))
            .collect::<Vec<_>>()
    };
    Ok(psi_from_proportions(&props(expected), &props(actual)))
}

pub fn psi_from_proportions(expected: &[f64], actual: &[f64]) -> f64 {
    expected
        .iter()
        .zip(actual)
        .map(|(e, a)| (a - e) * (a / e).ln())
        .sum()
}

/// One-dimensional Wasserstein-1 distance: ∫|F_x − F_y|.
pub fn wasserstein1(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Domain("Wasserstein distance needs nonempty samples".into()));
    }
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mut all: Vec<f64> = a.iter().chain(&b).copied().collect();
    all.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    for w in all.windows(2) {
        while i < a.len() && a[i] <= w[0] {
            i += 1;
        }
        while j < b.len() && b[j] <= w[0] {
            j += 1;
        }
        total += (i as f64 / n - j as f64 / m).abs() * (w[1] - w[0]);
    }
    Ok(total)
}

/// NDCG of the ranking induced by `new` (descending, ties by index) with
/// `reference` as graded relevance. An all-zero reference scores 1.
pub fn ndcg_importance(reference: &[f64], new: &[f64]) -> Result<f64> {
    if reference.len() != new.len() {
        return Err(Error::shape(format!("{} importances", reference.len()), new.len()));
    }
    if reference.is_empty() {
        return Err(Error::Domain("NDCG needs at least one feature".into()));
    }
    if reference.iter().chain(new).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain("importances must be finite and non-negative".into()));
    }
    let dcg = |order: &[usize]| -> f64 {
        order
            .iter()
            .enumerate()
            .map(|(k, &j)| reference[j] / ((k + 2) as f64).log2())
            .sum()
    };
    let ranked = |v: &[f64]| {
        let mut o: Vec<usize> = (0..v.len()).collect();
        o.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
        o
    };
    let ideal = dcg(&ranked(reference));
    if ideal == 0.0 {
        return Ok(1.0);
    }
    Ok((dcg(&ranked(new)) / ideal).clamp(0.0, 1.0))
}
