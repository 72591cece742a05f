use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::QuantileLevels;
use crate::nn::Architecture;
use crate::optim::TrainConfig;
use crate::scenarios::Scenario;
use crate::PAPER_TAUS;

/// Estimators compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Squared-error network; scored against the median.
    SqerrNet,
    /// Joint non-crossing network over all plan levels.
    QuantileNet,
    /// Same estimator as `QuantileNet`, reported under its own name.
    CompositeNet,
    /// Geometric quantile network with the zero direction (L1-median).
    GeometricNet,
    /// Marginal pinball network at level 0.5.
    MarginalNet,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::SqerrNet,
        Method::QuantileNet,
        Method::CompositeNet,
        Method::GeometricNet,
        Method::MarginalNet,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::SqerrNet => "sqerr_net",
            Method::QuantileNet => "quantile_net",
            Method::CompositeNet => "composite_net",
            Method::GeometricNet => "geometric_net",
            Method::MarginalNet => "marginal_net",
        }
    }

    /// Whether the method can be fitted to the scenario's response dimension.
    pub fn supports(&self, scenario: &Scenario) -> bool {
        match self {
            Method::SqerrNet => true,
            Method::QuantileNet | Method::CompositeNet => !scenario.is_multivariate(),
            Method::GeometricNet | Method::MarginalNet => scenario.is_multivariate(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// A full sweep: scenarios x methods x sample sizes, each repeated `trials` times.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub scenarios: Vec<u8>,
    pub methods: Vec<Method>,
    pub n_grid: Vec<usize>,
    pub taus: QuantileLevels,
    pub trials: usize,
    pub n_test: usize,
    pub base_seed: u64,
    /// Training settings; `seed` is replaced per trial.
    pub train: TrainConfig,
    pub architecture: Architecture,
}

impl Default for ExperimentPlan {
    /// Desk-scale sweep: 5 trials, n in {100, 1000}, 2000 test points.
    fn default() -> Self {
        Self {
            scenarios: Scenario::IDS.to_vec(),
            methods: vec![
                Method::SqerrNet,
                Method::QuantileNet,
                Method::GeometricNet,
                Method::MarginalNet,
            ],
            n_grid: vec![100, 1000],
            taus: QuantileLevels::new(PAPER_TAUS.to_vec()).expect("valid levels"),
            trials: 5,
            n_test: 2000,
            base_seed: 0,
            train: TrainConfig::default(),
            architecture: Architecture::default(),
        }
    }
}

impl ExperimentPlan {
    /// The full-size protocol: 25 trials, n up to 10000, 10000 test points.
    pub fn paper_scale(mut self) -> Self {
        self.trials = 25;
        self.n_grid = vec![100, 1000, 10_000];
        self.n_test = 10_000;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.n_test == 0 {
            return Err(Error::InvalidArgument("trials and n_test must be at least 1".into()));
        }
        if self.methods.is_empty() || self.scenarios.is_empty() || self.n_grid.is_empty() {
            return Err(Error::InvalidArgument(
                "plan needs at least one scenario, method and sample size".into(),
            ));
        }
        for &id in &self.scenarios {
            Scenario::new(id)?;
        }
        if self.n_grid.contains(&0) {
            return Err(Error::InvalidArgument("sample sizes must be positive".into()));
        }
        self.train.validate()
    }

    /// Supported `(scenario, method, n)` cells in sweep order; unsupported pairs are omitted.
    pub fn cells(&self) -> Vec<PlanCell> {
        let mut out = Vec::new();
        for &scenario in &self.scenarios {
            let s = Scenario::new(scenario).expect("validated scenario id");
            for &n in &self.n_grid {
                for &method in &self.methods {
                    if method.supports(&s) {
                        out.push(PlanCell {
                            scenario,
                            method,
                            n,
                        });
                    }
                }
            }
        }
        out
    }

    /// Reads a TOML plan; absent keys keep the desk-scale defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: PlanFile = toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|s| format!("plan byte {}", s.start))
                .unwrap_or_else(|| "plan".into());
            Error::parse(at, e.message())
        })?;
        let mut plan = ExperimentPlan::default();
        if let Some(v) = file.scenarios {
            plan.scenarios = v;
        }
        if let Some(v) = file.methods {
            plan.methods = v
                .iter()
                .map(|s| s.parse())
                .collect::<Result<Vec<Method>>>()?;
        }
        if let Some(v) = file.n_grid {
            plan.n_grid = v;
        }
        if let Some(v) = file.taus {
            plan.taus = QuantileLevels::new(v)?;
        }
        if let Some(v) = file.trials {
            plan.trials = v;
        }
        if let Some(v) = file.n_test {
            plan.n_test = v;
        }
        if let Some(v) = file.base_seed {
            plan.base_seed = v;
        }
        let t = &mut plan.train;
        if let Some(v) = file.epochs {
            t.epochs = v;
        }
        if let Some(v) = file.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = file.lr0 {
            t.lr0 = v;
        }
        if let Some(v) = file.decay_every {
            t.decay_every = v;
        }
        if let Some(v) = file.momentum {
            t.momentum = v;
        }
        if let Some(v) = file.decay_factor {
            t.decay_factor = v;
        }
        if let Some(v) = file.hidden {
            plan.architecture.hidden = v;
        }
        if let Some(v) = file.dropout {
            plan.architecture.dropout = v;
        }
        if let Some(v) = file.batch_norm {
            plan.architecture.batch_norm = v;
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    scenarios: Option<Vec<u8>>,
    methods: Option<Vec<String>>,
    n_grid: Option<Vec<usize>>,
    taus: Option<Vec<f64>>,
    trials: Option<usize>,
    n_test: Option<usize>,
    base_seed: Option<u64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr0: Option<f64>,
    decay_every: Option<usize>,
    momentum: Option<f64>,
    decay_factor: Option<f64>,
    hidden: Option<Vec<usize>>,
    dropout: Option<f64>,
    batch_norm: Option<bool>,
}

/// One `(scenario, method, n)` combination of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PlanCell {
    pub scenario: u8,
    pub method: Method,
    pub n: usize,
}
