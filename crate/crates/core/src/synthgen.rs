//! Seeded generators for the synthetic scenarios.
//!
//! Feature columns are named `x1..xp`, the target `y` and the protected
//! attribute `z`. Every scenario draws its parts from separate derived
//! streams of the spec's seed, so a part does not change when another one
//! does.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::sigmoid;
use crate::rng::SeededRng;

pub const TARGET: &str = "y";
pub const PROTECTED: &str = "z";
const NOISE_STD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtCase {
    /// Target depends on the feature correlated with the protected group.
    Indirect,
    /// Target ignores that feature.
    Uninformative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// y ~ Bernoulli(σ(·)).
    Bernoulli,
    /// y = σ(·), a regression target.
    Probability,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    EtFairness {
        gamma: f64,
        case: EtCase,
        five_features: bool,
        target: TargetMode,
    },
    /// Independent standard normals in `train`/`test`, correlation `rho`
    /// between x1 and x2 in `new`.
    CovariateRho { rho: f64, extra_feature: bool },
    ConceptPair,
    UnusedFeature { shift: f64 },
    Yule,
    /// x1 ~ U(0,1), x2 ~ U(1,2) with y = x1 + x2; `new` swaps the ranges.
    UniformSwap,
    Power { mu: f64, q: f64 },
    Deterioration,
    SweepReplace { feature: usize, lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(flatten)]
    pub kind: ScenarioKind,
    pub n: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ScenarioData {
    pub train: Dataset,
    pub new: Dataset,
    /// Held-out draw from the training distribution, where the scenario has one.
    pub test: Option<Dataset>,
    /// Second target on `train`'s rows (concept pair only).
    pub alt_target: Option<Vec<f64>>,
    /// Unobserved variables behind `train`, by name.
    pub latent: Vec<(String, Vec<f64>)>,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, n: usize, seed: u64) -> Self {
        Self { kind, n, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must lie in [0,1), got {v}")))
            }
        };
        if self.n < 10 {
            return Err(Error::Domain(format!("scenario needs n >= 10, got {}", self.n)));
        }
        match self.kind {
            ScenarioKind::EtFairness { gamma, .. } => unit("gamma", gamma),
            ScenarioKind::CovariateRho { rho, .. } => unit("rho", rho),
            ScenarioKind::UnusedFeature { shift } if !shift.is_finite() => {
                Err(Error::Domain("shift must be finite".into()))
            }
            ScenarioKind::Power { mu, q } => {
                if !(mu >= 0.0 && mu.is_finite()) {
                    Err(Error::Domain(format!("mu must be finite and >= 0, got {mu}")))
                } else if !(q > 0.0 && q < 1.0) {
                    Err(Error::Domain(format!("q must lie in (0,1), got {q}")))
                } else {
                    Ok(())
                }
            }
            ScenarioKind::SweepReplace { feature, lo, hi } => {
                if feature >= 3 {
                    Err(Error::Domain(format!("sweep feature index {feature} out of range 0..3")))
                } else if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    Err(Error::Domain(format!("sweep range must satisfy lo < hi, got ({lo}, {hi})")))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { hi } else { lo + step * i as f64 }).collect()
}

fn with_target(cols: &[Vec<f64>], y: Vec<f64>) -> Result<Dataset> {
    Dataset::from_columns(cols)?.with_target(TARGET, y)
}

fn normals(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

/// Second coordinate of a standard bivariate normal with correlation `r`
/// to `base`, via the Cholesky factor of [[1, r], [r, 1]].
fn correlated(rng: &mut SeededRng, base: &[f64], r: f64) -> Vec<f64> {
    let s = (1.0 - r * r).sqrt();
    base.iter().map(|b| r * b + s * rng.normal()).collect()
}

pub fn generate(spec: &ScenarioSpec) -> Result<ScenarioData> {
    spec.validate()?;
    let n = spec.n;
    let stream = |k: u64| SeededRng::derived(spec.seed, k);
    let plain = |train, new, test| ScenarioData {
        train,
        new,
        test,
        alt_target: None,
        latent: Vec::new(),
    };
    match spec.kind {
        ScenarioKind::EtFairness {
            gamma,
            case,
            five_features,
            target,
        } => {
            let (train, latent) = et_fairness(&mut stream(1), n, gamma, case, five_features, target)?;
            let (new, _) = et_fairness(&mut stream(2), n, gamma, case, five_features, target)?;
            Ok(ScenarioData { latent, ..plain(train, new, None) })
        }
        ScenarioKind::CovariateRho { rho, extra_feature } => Ok(plain(
            covariate(&mut stream(1), n, 0.0, extra_feature)?,
            covariate(&mut stream(2), n, rho, extra_feature)?,
            Some(covariate(&mut stream(3), n, 0.0, extra_feature)?),
        )),
        ScenarioKind::ConceptPair => {
            let concept = |rng: &mut SeededRng, swap: bool| {
                let x1: Vec<f64> = (0..n).map(|_| 1.0 + rng.normal()).collect();
                let x2: Vec<f64> = (0..n).map(|_| 1.0 + rng.normal()).collect();
                let y: Vec<f64> = (0..n)
                    .map(|i| {
                        let signal = if swap {
                            x1[i] * x2[i] * x2[i]
                        } else {
                            x1[i] * x1[i] * x2[i]
                        };
                        signal + NOISE_STD * rng.normal()
                    })
                    .collect();
                (x1, x2, y)
            };
            let (x1, x2, y) = concept(&mut stream(1), false);
            let mut alt = stream(4);
            let alt_target = (0..n)
                .map(|i| x1[i] * x2[i] * x2[i] + NOISE_STD * alt.normal())
                .collect();
            let (n1, n2, ny) = concept(&mut stream(2), true);
            Ok(ScenarioData {
                alt_target: Some(alt_target),
                ..plain(with_target(&[x1, x2], y)?, with_target(&[n1, n2], ny)?, None)
            })
        }
        ScenarioKind::UnusedFeature { shift } => {
            let draw = |rng: &mut SeededRng| {
                let cols: Vec<Vec<f64>> = (0..3).map(|_| normals(rng, n)).collect();
                let y: Vec<f64> = (0..n)
                    .map(|i| cols[0][i] * cols[1][i] + NOISE_STD * rng.normal())
                    .collect();
                with_target(&cols, y)
            };
            let train = draw(&mut stream(1))?;
            let test = draw(&mut stream(3))?;
            let shifted: Vec<f64> = test.column(2).iter().map(|v| v + shift).collect();
            let new = test.with_column_replaced(2, &shifted)?;
            Ok(plain(train, new, Some(test)))
        }
        ScenarioKind::Yule => Ok(plain(yule(&mut stream(1), n)?, yule(&mut stream(2), n)?, None)),
        ScenarioKind::UniformSwap => {
            let draw = |rng: &mut SeededRng, swap: bool| {
                let (a, b) = if swap { (1.0, 0.0) } else { (0.0, 1.0) };
                let x1: Vec<f64> = (0..n).map(|_| rng.uniform_range(a, a + 1.0)).collect();
                let x2: Vec<f64> = (0..n).map(|_| rng.uniform_range(b, b + 1.0)).collect();
                let y = x1.iter().zip(&x2).map(|(u, v)| u + v).collect();
                with_target(&[x1, x2], y)
            };
            Ok(plain(
                draw(&mut stream(1), false)?,
                draw(&mut stream(2), true)?,
                Some(draw(&mut stream(3), false)?),
            ))
        }
        ScenarioKind::Power { mu, q } => Ok(plain(
            power(&mut stream(1), n, mu, q)?,
            power(&mut stream(2), n, mu, q)?,
            None,
        )),
        ScenarioKind::Deterioration => Ok(plain(
            deterioration(&mut stream(1), n)?,
            deterioration(&mut stream(2), n)?,
            None,
        )),
        ScenarioKind::SweepReplace { feature, lo, hi } => {
            let base = deterioration(&mut stream(1), n)?;
            let mut rng = stream(2);
            let mut cols: Vec<Vec<f64>> = (0..3).map(|_| sample_deterioration_features(&mut rng, n)).collect();
            cols[feature] = linspace(lo, hi, n);
            let y = deterioration_target(&mut rng, &cols);
            Ok(plain(base, with_target(&cols, y)?, None))
        }
    }
}

fn et_fairness(
    rng: &mut SeededRng,
    n: usize,
    gamma: f64,
    case: EtCase,
    five_features: bool,
    target: TargetMode,
) -> Result<(Dataset, Vec<(String, Vec<f64>)>)> {
    let x1 = normals(rng, n);
    let x2 = normals(rng, n);
    let (cols, hidden_name, hidden) = if five_features {
        // x3 and x4 load on the hidden x5 with correlations γ and γ/2
        let x5 = normals(rng, n);
        let x3 = correlated(rng, &x5, gamma);
        let x4 = correlated(rng, &x5, 0.5 * gamma);
        (vec![x1, x2, x3, x4], "x5", x5)
    } else {
        let x3 = normals(rng, n);
        let x4 = correlated(rng, &x3, gamma);
        (vec![x1, x2, x3], "x4", x4)
    };
    let z: Vec<u8> = hidden.iter().map(|&v| u8::from(v > 0.0)).collect();
    let used = match case {
        EtCase::Indirect => cols.len(),
        EtCase::Uninformative => 2,
    };
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let prob = sigmoid((0..used).map(|j| cols[j][i]).sum());
        y.push(match target {
            TargetMode::Probability => prob,
            TargetMode::Bernoulli => f64::from(u8::from(rng.bernoulli(prob))),
        });
    }
    let d = with_target(&cols, y)?.with_protected(PROTECTED, z)?;
    Ok((d, vec![(hidden_name.to_owned(), hidden)]))
}

fn covariate(rng: &mut SeededRng, n: usize, rho: f64, extra_feature: bool) -> Result<Dataset> {
    let x1 = normals(rng, n);
    let x2 = correlated(rng, &x1, rho);
    let mut cols = vec![x1, x2];
    if extra_feature {
        cols.push(normals(rng, n));
    }
    let y = (0..n)
        .map(|i| {
            let inter = cols[0][i] * cols[1][i];
            if extra_feature {
                inter + cols[2][i]
            } else {
                inter + NOISE_STD * rng.normal()
            }
        })
        .collect();
    with_target(&cols, y)
}

fn yule(rng: &mut SeededRng, n: usize) -> Result<Dataset> {
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        let zi = rng.bernoulli(0.5);
        let a = rng.uniform_range(-3.0, -1.0);
        let b = rng.normal_with(2.0, 1.0);
        let (u, v) = if zi { (a, b) } else { (b, a) };
        x1.push(u);
        x2.push(v);
        z.push(u8::from(zi));
    }
    let y = x1.iter().zip(&x2).map(|(u, v)| u + v).collect();
    with_target(&[x1, x2], y)?.with_protected(PROTECTED, z)
}

/// Two Gaussian classes with covariance [[1, .5], [.5, 1]] and means
/// ±(μ, μ); the class is both the target and the protected attribute.
fn power(rng: &mut SeededRng, n: usize, mu: f64, q: f64) -> Result<Dataset> {
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let s = (1.0f64 - 0.25).sqrt();
    for _ in 0..n {
        let positive = rng.bernoulli(q);
        let m = if positive { mu } else { -mu };
        let e1 = rng.normal();
        let e2 = rng.normal();
        x1.push(m + e1);
        x2.push(m + 0.5 * e1 + s * e2);
        z.push(u8::from(positive));
    }
    let y = z.iter().map(|&v| f64::from(v)).collect();
    with_target(&[x1, x2], y)?.with_protected(PROTECTED, z)
}

/// N(1, 0.1) draws, 0.1 being the variance.
fn sample_deterioration_features(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    let std = 0.1f64.sqrt();
    (0..n).map(|_| 1.0 + std * rng.normal()).collect()
}

fn deterioration_target(rng: &mut SeededRng, cols: &[Vec<f64>]) -> Vec<f64> {
    (0..cols[0].len())
        .map(|i| cols[0][i].powi(2) + cols[1][i] + NOISE_STD * rng.normal())
        .collect()
}

fn deterioration(rng: &mut SeededRng, n: usize) -> Result<Dataset> {
    let cols: Vec<Vec<f64>> = (0..3).map(|_| sample_deterioration_features(rng, n)).collect();
    let y = deterioration_target(rng, &cols);
    with_target(&cols, y)
}
