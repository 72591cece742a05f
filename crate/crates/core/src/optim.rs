//! Minibatch SGD with Nesterov momentum and stepwise learning-rate decay.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::matrix::Matrix;
use crate::nn::{MlpModel, Mode};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Upper bound on the minibatch size; the effective size is `min(n, batch_size)`.
    pub batch_size: usize,
    pub lr0: f64,
    pub momentum: f64,
    pub decay_factor: f64,
    /// Epochs between learning-rate decays.
    pub decay_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            lr0: 0.1,
            momentum: 0.9,
            decay_factor: 0.5,
            decay_every: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad(format!("decay factor must lie in (0, 1], got {}", self.decay_factor));
        }
        if self.batch_size == 0 || self.decay_every == 0 {
            return bad("batch_size and decay_every must be positive".into());
        }
        Ok(())
    }

    /// `lr0 * decay_factor ^ floor(epoch / decay_every)`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.lr0 * self.decay_factor.powi((epoch / self.decay_every) as i32)
    }
}

/// Momentum buffers, one per model parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityState {
    pub buffers: Vec<Matrix>,
}

impl VelocityState {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            buffers: model
                .params()
                .iter()
                .map(|p| Matrix::zeros(p.rows(), p.cols()))
                .collect(),
        }
    }
}

/// One Nesterov update: `v' = mu v - lr g`, `theta' = theta + mu v' - lr g`.
pub fn nesterov_step(
    theta: &mut Matrix,
    velocity: &mut Matrix,
    grad: &Matrix,
    lr: f64,
    mu: f64,
) -> Result<()> {
    theta.check_same_shape("nesterov_step", velocity)?;
    theta.check_same_shape("nesterov_step", grad)?;
    for ((t, v), g) in theta
        .data_mut()
        .iter_mut()
        .zip(velocity.data_mut())
        .zip(grad.data())
    {
        *v = mu * *v - lr * g;
        *t += mu * *v - lr * g;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Sample-weighted mean minibatch loss of each epoch.
    pub history: Vec<f64>,
    /// Starting learning rate of the run that produced the model.
    pub lr0: f64,
}

/// Trains `model` in place and leaves it in evaluation mode.
pub fn train(
    model: &mut MlpModel,
    x: &Matrix,
    y: &Matrix,
    loss: &LossKind,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = x.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if y.rows() != n {
        return Err(Error::shape("train", format!("{n} response rows"), y.rows()));
    }
    if model.input_dim() != x.cols() {
        return Err(Error::shape("train", format!("{} input columns", model.input_dim()), x.cols()));
    }
    let out_dim = loss.output_dim(y.cols())?;
    if model.output_dim() != out_dim {
        return Err(Error::shape(
            "train",
            format!("model output width {out_dim} for the {} loss", loss.name()),
            model.output_dim(),
        ));
    }

    let batch = cfg.batch_size.min(n);
    let skip_singletons = model.has_batch_norm();
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = rng::stream(cfg.seed, "shuffle");
    let mut dropout_rng = rng::stream(cfg.seed, "dropout");
    let mut velocity = VelocityState::zeros_like(model);
    let mut history = Vec::with_capacity(cfg.epochs);

    model.set_mode(Mode::Train);
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(batch) {
            if skip_singletons && chunk.len() < 2 {
                continue;
            }
            let xb = x.select_rows(chunk);
            let yb = y.select_rows(chunk);
            let (out, cache) = model.forward(&xb, Some(&mut dropout_rng))?;
            let (l, dy) = loss.evaluate(&yb, &out)?;
            if !l.is_finite() {
                model.set_mode(Mode::Eval);
                return Err(Error::NonFinite("training loss"));
            }
            let grads = model.backward(&cache, &dy)?;
            for ((p, v), g) in model
                .params_mut()
                .into_iter()
                .zip(velocity.buffers.iter_mut())
                .zip(&grads.grads)
            {
                nesterov_step(p, v, g, lr, cfg.momentum)?;
            }
            total += l * chunk.len() as f64;
            seen += chunk.len();
        }
        if seen == 0 {
            model.set_mode(Mode::Eval);
            return Err(Error::DegenerateBatch(n));
        }
        history.push(total / seen as f64);
    }
    model.set_mode(Mode::Eval);
    if model.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("parameters"));
    }
    if !evaluate_loss(model, x, y, loss)?.is_finite() {
        return Err(Error::NonFinite("evaluation loss"));
    }
    Ok(TrainOutcome {
        history,
        lr0: cfg.lr0,
    })
}

/// Times [`train_with_backoff`] halves the starting learning rate before giving up.
pub const MAX_LR_BACKOFF: u32 = 6;

/// [`train`], restarted from the initial parameters with half the starting learning rate
/// whenever the run produces a non-finite value. Other errors are returned immediately.
pub fn train_with_backoff(
    model: &mut MlpModel,
    x: &Matrix,
    y: &Matrix,
    loss: &LossKind,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let init = model.clone();
    let mut cfg = cfg.clone();
    let mut attempt = 0;
    loop {
        match train(model, x, y, loss, &cfg) {
            Err(Error::NonFinite(_)) if attempt < MAX_LR_BACKOFF => {
                attempt += 1;
                cfg.lr0 *= 0.5;
                *model = init.clone();
            }
            other => return other,
        }
    }
}

/// Mean loss of the whole dataset under evaluation-mode predictions.
pub fn evaluate_loss(model: &MlpModel, x: &Matrix, y: &Matrix, loss: &LossKind) -> Result<f64> {
    let out = model.predict(x)?;
    Ok(loss.evaluate(y, &out)?.0)
}
