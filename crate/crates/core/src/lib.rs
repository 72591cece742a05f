//! Quantile regression with ReLU feedforward networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`matrix`]: the dense row-major `f64` container used for data, parameters and gradients.
//! - [`nn`]: a multilayer perceptron (linear, batch norm, ReLU, dropout) with hand-written
//!   backward passes, finite-difference checking and JSON persistence.
//! - [`losses`]: pinball, squared error, the cumulative-softplus non-crossing multi-quantile
//!   loss, the geometric quantile loss and the marginal multivariate pinball loss.
//! - [`optim`]: minibatch SGD with Nesterov momentum and stepwise learning-rate decay.
//! - [`scenarios`]: the seven heavy-tailed synthetic generators with analytic quantile oracles.
//! - [`metrics`]: quantile MSE, the `min(|t|, t^2)` discrepancy, coverage and crossing counts.
//! - [`harness`]: experiment plans, repeated trials, aggregation and result files.

pub mod error;
pub mod harness;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod scenarios;

pub use error::{Error, Result};
pub use harness::{ExperimentPlan, Method, TrialResult};
pub use losses::{DirectionU, LossKind, QuantileLevels};
pub use matrix::Matrix;
pub use nn::{LayerSpec, MlpModel, Mode};
pub use optim::{TrainConfig, TrainOutcome};
pub use scenarios::{Dataset, NoiseKind, Scenario};

/// The quantile levels used throughout the reported experiments.
pub const PAPER_TAUS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];
