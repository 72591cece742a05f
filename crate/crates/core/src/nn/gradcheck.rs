//! Central finite-difference checks of [`MlpModel::backward`].

use rand::seq::index;
use rand::Rng;

use super::layer::{Layer, LayerSpec};
use super::model::{init_model, MlpModel, Mode};
use crate::error::Result;
use crate::losses::{self, DirectionU, QuantileLevels};
use crate::matrix::Matrix;
use crate::rng;

/// Coordinates compared per check when the model has more parameters than this.
pub const GRAD_CHECK_SAMPLES: usize = 128;

/// `|a - b| / max(1e-8, |a| + |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

/// Compares backpropagated gradients against `(L(θ+h) - L(θ-h)) / 2h` on a random subset
/// of parameter coordinates and returns the largest relative error.
///
/// `loss_fn(y, output)` returns the loss and its gradient with respect to `output`. In train
/// mode the dropout masks and batch statistics of a single forward pass are replayed for every
/// perturbation; the caller's model is not modified.
pub fn grad_check<F>(
    model: &MlpModel,
    loss_fn: F,
    x: &Matrix,
    y: &Matrix,
    h: f64,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&Matrix, &Matrix) -> Result<(f64, Matrix)>,
{
    let mut work = model.clone();
    let mut r = rng::stream(seed, "grad-check");
    let (out, cache) = work.forward(x, Some(&mut r))?;
    let (_, dy) = loss_fn(y, &out)?;
    let analytic = work.backward(&cache, &dy)?;

    let eval = |m: &MlpModel| -> Result<f64> {
        let out = match cache.mode() {
            Mode::Train => m.forward_replay(x, &cache)?,
            Mode::Eval => m.predict(x)?,
        };
        Ok(loss_fn(y, &out)?.0)
    };

    let sizes: Vec<usize> = work.params().iter().map(|p| p.len()).collect();
    let total: usize = sizes.iter().sum();
    let picks: Vec<usize> = if total <= GRAD_CHECK_SAMPLES {
        (0..total).collect()
    } else {
        let mut v = index::sample(&mut r, total, GRAD_CHECK_SAMPLES).into_vec();
        v.sort_unstable();
        v
    };

    let inert = inert_params(&work, cache.mode());
    let mut worst = 0.0f64;
    for flat in picks {
        let (p, e) = locate(&sizes, flat);
        if inert.contains(&p) {
            // The loss does not depend on these at all; a difference quotient would only
            // measure roundoff, so require the analytic value to vanish instead.
            let a = analytic.grads[p].data()[e];
            worst = worst.max(if a.abs() <= INERT_TOLERANCE { 0.0 } else { relative_error(a, 0.0) });
            continue;
        }
        let orig = work.params()[p].data()[e];
        work.params_mut()[p].data_mut()[e] = orig + h;
        let plus = eval(&work)?;
        work.params_mut()[p].data_mut()[e] = orig - h;
        let minus = eval(&work)?;
        work.params_mut()[p].data_mut()[e] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        worst = worst.max(relative_error(analytic.grads[p].data()[e], numeric));
    }
    Ok(worst)
}

/// Largest analytic gradient accepted for a parameter the loss cannot depend on.
pub const INERT_TOLERANCE: f64 = 1e-10;

/// Parameter indices the loss is invariant to: in train mode, the bias of a linear layer that
/// feeds batch norm is removed by the batch-mean subtraction.
fn inert_params(model: &MlpModel, mode: Mode) -> Vec<usize> {
    let mut out = Vec::new();
    let mut index = 0;
    let layers = model.layers();
    for (k, layer) in layers.iter().enumerate() {
        let count = layer.params().len();
        if mode == Mode::Train
            && matches!(layer, Layer::Linear { .. })
            && matches!(layers.get(k + 1), Some(Layer::BatchNorm { .. }))
        {
            out.push(index + 1);
        }
        index += count;
    }
    out
}

/// Outcome of [`random_grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomCheck {
    pub max_rel_error: f64,
    /// Architecture, mode and loss that were checked, for reporting.
    pub description: String,
}

/// Builds a random network (1 to 3 hidden layers, optional batch norm and dropout, random
/// mode) and a random batch of 8, picks one of the training losses and runs [`grad_check`]
/// with `h = 1e-5`. Targets of kinked losses are placed at least 0.5 away from the outputs.
pub fn random_grad_check(seed: u64) -> Result<RandomCheck> {
    let mut r = rng::stream(seed, "random-architecture");
    let d = r.random_range(2..=5);
    let depth = r.random_range(1..=3);
    let batch_norm = r.random_bool(0.5);
    let rate = [0.0, 0.1, 0.3][r.random_range(0..3)];
    let loss_id = r.random_range(0..5);
    let out_dim = match loss_id {
        2 => 3,
        3 | 4 => 2,
        _ => 1,
    };
    let mut spec = Vec::new();
    let mut width = d;
    let mut widths = Vec::new();
    for _ in 0..depth {
        let w = r.random_range(3..=10);
        widths.push(w);
        spec.push(LayerSpec::Linear { inputs: width, outputs: w });
        if batch_norm {
            spec.push(LayerSpec::BatchNorm { width: w });
        }
        spec.push(LayerSpec::Relu);
        if rate > 0.0 {
            spec.push(LayerSpec::Dropout { rate });
        }
        width = w;
    }
    spec.push(LayerSpec::Linear { inputs: width, outputs: out_dim });
    let mut model = init_model(&spec, seed)?;
    let train = r.random_bool(0.5);
    model.set_mode(if train { Mode::Train } else { Mode::Eval });
    for layer in model.layers_mut() {
        match layer {
            Layer::Linear { b, .. } => b.data_mut().iter_mut().for_each(|v| *v = r.random_range(-0.5..0.5)),
            Layer::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
            } => {
                gamma.data_mut().iter_mut().for_each(|v| *v = r.random_range(0.5..1.5));
                beta.data_mut().iter_mut().for_each(|v| *v = r.random_range(-0.5..0.5));
                running_mean.data_mut().iter_mut().for_each(|v| *v = r.random_range(-0.5..0.5));
                running_var.data_mut().iter_mut().for_each(|v| *v = r.random_range(0.5..2.0));
            }
            _ => {}
        }
    }

    let batch = 8;
    let h = 1e-5;
    // Resample the batch until every ReLU input is at least 100 h from the kink. The stream
    // matches the forward pass inside grad_check, so targets see the replayed output.
    let (x, check_seed, out) = loop {
        let x = Matrix::from_fn(batch, d, |_, _| r.random_range(-1.0..1.0));
        let check_seed = r.random::<u64>();
        let mut probe = model.clone();
        let mut fr = rng::stream(check_seed, "grad-check");
        let (out, cache) = probe.forward(&x, Some(&mut fr))?;
        if model.relu_margin(&x, &cache)? > 100.0 * h {
            break (x, check_seed, out);
        }
    };
    let offset = |r: &mut rng::Rng| {
        let m: f64 = r.random_range(0.5..1.5);
        if r.random_bool(0.5) { m } else { -m }
    };
    let (name, err) = match loss_id {
        0 => {
            let y = out.map(|v| v + offset(&mut r));
            ("squared", grad_check(&model, losses::squared_loss, &x, &y, h, check_seed)?)
        }
        1 => {
            let tau = r.random_range(0.05..0.95);
            let y = out.map(|v| v + offset(&mut r));
            let f = move |y: &Matrix, o: &Matrix| losses::pinball_loss(tau, y, o);
            ("pinball", grad_check(&model, f, &x, &y, h, check_seed)?)
        }
        2 => {
            let levels = QuantileLevels::new(vec![0.1, 0.4, 0.8])?;
            let q = losses::composite_predict(&out);
            let y = Matrix::from_fn(batch, 1, |i, _| {
                let m: f64 = r.random_range(0.5..1.5);
                if r.random_bool(0.5) { q.get(i, 2) + m } else { q.get(i, 0) - m }
            });
            let f = move |y: &Matrix, o: &Matrix| losses::composite_loss(y, o, &levels);
            ("composite", grad_check(&model, f, &x, &y, h, check_seed)?)
        }
        3 => {
            let u = DirectionU::new(vec![r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)])?;
            let y = out.map(|v| v + offset(&mut r));
            let f = move |y: &Matrix, o: &Matrix| losses::geometric_loss(&u, y, o);
            ("geometric", grad_check(&model, f, &x, &y, h, check_seed)?)
        }
        _ => {
            let tau = r.random_range(0.05..0.95);
            let y = out.map(|v| v + offset(&mut r));
            let f = move |y: &Matrix, o: &Matrix| losses::marginal_loss(tau, y, o);
            ("marginal", grad_check(&model, f, &x, &y, h, check_seed)?)
        }
    };
    Ok(RandomCheck {
        max_rel_error: err,
        description: format!(
            "d={d} hidden={widths:?} batch_norm={batch_norm} dropout={rate} mode={} loss={name}",
            if train { "train" } else { "eval" }
        ),
    })
}

fn locate(sizes: &[usize], mut flat: usize) -> (usize, usize) {
    for (p, &n) in sizes.iter().enumerate() {
        if flat < n {
            return (p, flat);
        }
        flat -= n;
    }
    unreachable!("flat index within total parameter count")
}
