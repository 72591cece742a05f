use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{ExperimentPlan, Method, PlanCell};
use crate::error::{Error, Result};
use crate::losses::{DirectionU, LossKind};
use crate::matrix::Matrix;
use crate::metrics::{crossing_count, EvalReport};
use crate::nn::{init_model, mlp_spec, MlpModel};
use crate::optim::{train_with_backoff, TrainConfig};
use crate::rng::{self, fnv1a, splitmix64};
use crate::scenarios::Scenario;

/// Metrics of one fitted level in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub scenario: u8,
    pub method: Method,
    pub n: usize,
    pub tau: f64,
    pub trial: usize,
    pub seed: u64,
    pub mse: f64,
    pub delta_n2: f64,
    pub coverage: f64,
    pub crossings: usize,
    pub runtime_ms: u64,
}

/// Seed of the model and training stream of one trial.
pub fn trial_seed(base_seed: u64, cell: &PlanCell, trial: usize) -> u64 {
    let key = format!("{}|{}|{}|{}", cell.scenario, cell.method, cell.n, trial);
    splitmix64(base_seed ^ fnv1a(key.as_bytes()))
}

/// Seed of the train/test data of one trial, shared by every method.
pub fn data_seed(base_seed: u64, scenario: u8, n: usize, trial: usize) -> u64 {
    let key = format!("data|{scenario}|{n}|{trial}");
    splitmix64(base_seed ^ fnv1a(key.as_bytes()))
}

/// A fitted network together with the loss that shaped its output.
pub struct FittedMethod {
    pub model: MlpModel,
    pub loss: LossKind,
}

impl FittedMethod {
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.loss.predict(&self.model.predict(x)?))
    }
}

/// Loss used to fit `method` and the levels its output columns estimate.
pub fn method_loss(method: Method, plan: &ExperimentPlan, scenario: &Scenario) -> Result<(LossKind, Vec<f64>)> {
    if !method.supports(scenario) {
        return Err(Error::Unsupported(format!(
            "{method} on scenario {} (response dimension {})",
            scenario.id, scenario.output_dim
        )));
    }
    Ok(match method {
        Method::QuantileNet | Method::CompositeNet => (
            LossKind::Composite(plan.taus.clone()),
            plan.taus.as_slice().to_vec(),
        ),
        Method::SqerrNet => (LossKind::Squared, vec![0.5]),
        Method::GeometricNet => (
            LossKind::Geometric(DirectionU::median(scenario.output_dim)),
            vec![0.5],
        ),
        Method::MarginalNet => (LossKind::Marginal { tau: 0.5 }, vec![0.5]),
    })
}

/// Builds and trains the network of `method` on `(x, y)`, backing off the learning rate
/// if the run diverges.
pub fn fit_method(
    method: Method,
    plan: &ExperimentPlan,
    scenario: &Scenario,
    x: &Matrix,
    y: &Matrix,
    seed: u64,
) -> Result<FittedMethod> {
    let (loss, _) = method_loss(method, plan, scenario)?;
    let out_dim = loss.output_dim(scenario.output_dim)?;
    let spec = mlp_spec(scenario.input_dim, out_dim, &plan.architecture);
    let mut model = init_model(&spec, seed)?;
    let cfg = TrainConfig {
        seed,
        ..plan.train.clone()
    };
    train_with_backoff(&mut model, x, y, &loss, &cfg)?;
    Ok(FittedMethod { model, loss })
}

/// Runs one repetition of a plan cell and scores every fitted level.
pub fn run_trial(plan: &ExperimentPlan, cell: &PlanCell, trial: usize) -> Result<Vec<TrialResult>> {
    let started = Instant::now();
    let scenario = Scenario::new(cell.scenario)?;
    let (_, levels) = method_loss(cell.method, plan, &scenario)?;
    let seed = trial_seed(plan.base_seed, cell, trial);
    let dseed = data_seed(plan.base_seed, cell.scenario, cell.n, trial);

    let train_set = scenario.generate(cell.n, dseed)?;
    let mut test_rng = rng::stream(dseed, "test");
    let x_test = scenario.sample_covariates(plan.n_test, &mut test_rng);
    let y_test = scenario.sample_responses(&x_test, &mut test_rng)?;

    let fitted = fit_method(cell.method, plan, &scenario, &train_set.x, &train_set.y, seed)?;
    let pred = fitted.predict(&x_test)?;
    let crossings = if levels.len() > 1 { crossing_count(&pred) } else { 0 };
    let runtime_ms = started.elapsed().as_millis() as u64;

    let mut out = Vec::with_capacity(levels.len());
    for (j, &tau) in levels.iter().enumerate() {
        let truth = scenario.true_quantile_matrix(&x_test, tau)?;
        let p = if levels.len() > 1 {
            Matrix::column(&pred.col_vec(j))
        } else {
            pred.clone()
        };
        let report = EvalReport::score(&p, &truth, &y_test, crossings)?;
        for v in [report.mse, report.delta_n2, report.coverage] {
            if !v.is_finite() {
                return Err(Error::NonFinite("trial metrics"));
            }
        }
        out.push(TrialResult {
            scenario: cell.scenario,
            method: cell.method,
            n: cell.n,
            tau,
            trial,
            seed,
            mse: report.mse,
            delta_n2: report.delta_n2,
            coverage: report.coverage,
            crossings,
            runtime_ms,
        });
    }
    Ok(out)
}

/// Runs every `(cell, trial)` of the plan. `jobs > 1` spreads trials over a thread pool;
/// results come back in sweep order either way.
pub fn run_plan(plan: &ExperimentPlan, jobs: usize) -> Result<Vec<TrialResult>> {
    plan.validate()?;
    let work: Vec<(PlanCell, usize)> = plan
        .cells()
        .into_iter()
        .flat_map(|c| (0..plan.trials).map(move |t| (c, t)))
        .collect();
    let batches: Vec<Vec<TrialResult>> = if jobs <= 1 {
        work.iter()
            .map(|(c, t)| run_trial(plan, c, *t))
            .collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| {
            work.par_iter()
                .map(|(c, t)| run_trial(plan, c, *t))
                .collect::<Result<_>>()
        })?
    };
    Ok(batches.into_iter().flatten().collect())
}
