//! Attribution-based auditing of tabular models: equal-treatment and
//! explanation-shift detectors, bootstrap uncertainty monitoring, and the
//! models, explainers, statistics and synthetic scenarios they rest on.

pub mod attribution;
pub mod dataset;
pub mod detectors;
pub mod error;
pub mod matrix;
pub mod models;
pub mod rng;
pub mod stats;
pub mod synthgen;
pub mod uncertainty;

pub use attribution::{BackgroundStats, ExplainMethod, ExplanationMatrix, LimeConfig};
pub use dataset::{CsvSchema, Dataset};
pub use detectors::{AuditedModel, DetectorKind, DetectorReport, ShiftScoreboard};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use models::{fit, ModelSpec, Predictor, Task};
pub use rng::SeededRng;
pub use stats::{Alternative, TestResult};
pub use synthgen::{ScenarioData, ScenarioKind, ScenarioSpec};
pub use uncertainty::{BootstrapEnsemble, MonitorConfig, MonitorMethod, MonitoringCurve};
