//! Fixtures shared by the benchmarks.

use attrishift::synthgen::generate;
use attrishift::{fit, AuditedModel, Dataset, ModelSpec, ScenarioData, ScenarioKind, ScenarioSpec, Task};

pub const SEED: u64 = 7;

pub fn covariate(n: usize) -> ScenarioData {
    generate(&ScenarioSpec::new(
        ScenarioKind::CovariateRho {
            rho: 0.5,
            extra_feature: true,
        },
        n,
        SEED,
    ))
    .expect("valid scenario")
}

pub fn deterioration(n: usize) -> Dataset {
    generate(&ScenarioSpec::new(ScenarioKind::Deterioration, n, SEED))
        .expect("valid scenario")
        .train
}

/// Default GBDT fitted on the training part, with it as background.
pub fn gbdt_model(data: &ScenarioData) -> AuditedModel {
    let m = fit(&ModelSpec::gbdt(Task::Regression), &data.train).expect("fit");
    AuditedModel::from_training(m, &data.train).expect("background")
}
