use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Op};

/// Normalisation constant added to batch variances.
pub const BN_EPS: f64 = 1e-5;
/// Weight on the previous running statistic when a train batch is folded in.
pub const BN_MOMENTUM: f64 = 0.9;

/// Architecture description of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Linear { inputs: usize, outputs: usize },
    BatchNorm { width: usize },
    Relu,
    Dropout { rate: f64 },
}

/// Where batch normalisation sits relative to the activation in [`mlp_spec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormOrder {
    /// Linear, BatchNorm, ReLU, Dropout.
    #[default]
    BeforeActivation,
    /// Linear, ReLU, BatchNorm, Dropout.
    AfterActivation,
}

/// Hidden-layer recipe for [`mlp_spec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    pub batch_norm: bool,
    pub dropout: f64,
    pub order: NormOrder,
}

impl Default for Architecture {
    /// Two hidden layers of 200 units with batch norm and dropout 0.1.
    fn default() -> Self {
        Self {
            hidden: vec![200, 200],
            batch_norm: true,
            dropout: 0.1,
            order: NormOrder::BeforeActivation,
        }
    }
}

/// Expands an [`Architecture`] into a layer list mapping `input_dim` to `output_dim`.
pub fn mlp_spec(input_dim: usize, output_dim: usize, arch: &Architecture) -> Vec<LayerSpec> {
    let mut spec = Vec::new();
    let mut width = input_dim;
    for &h in &arch.hidden {
        spec.push(LayerSpec::Linear {
            inputs: width,
            outputs: h,
        });
        match (arch.batch_norm, arch.order) {
            (true, NormOrder::BeforeActivation) => {
                spec.push(LayerSpec::BatchNorm { width: h });
                spec.push(LayerSpec::Relu);
            }
            (true, NormOrder::AfterActivation) => {
                spec.push(LayerSpec::Relu);
                spec.push(LayerSpec::BatchNorm { width: h });
            }
            (false, _) => spec.push(LayerSpec::Relu),
        }
        if arch.dropout > 0.0 {
            spec.push(LayerSpec::Dropout { rate: arch.dropout });
        }
        width = h;
    }
    spec.push(LayerSpec::Linear {
        inputs: width,
        outputs: output_dim,
    });
    spec
}

/// A layer together with its parameters and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Linear {
        /// `outputs x inputs`.
        w: Matrix,
        /// `1 x outputs`.
        b: Matrix,
    },
    BatchNorm {
        gamma: Matrix,
        beta: Matrix,
        running_mean: Matrix,
        running_var: Matrix,
    },
    Relu,
    Dropout {
        rate: f64,
    },
}

impl Layer {
    /// He-initialised linear layer with zero bias.
    pub(crate) fn linear<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let std = (2.0 / inputs.max(1) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("std is finite and positive");
        let w = Matrix::from_fn(outputs, inputs, |_, _| normal.sample(rng));
        Layer::Linear {
            w,
            b: Matrix::zeros(1, outputs),
        }
    }

    pub(crate) fn batch_norm(width: usize) -> Self {
        Layer::BatchNorm {
            gamma: Matrix::filled(1, width, 1.0),
            beta: Matrix::zeros(1, width),
            running_mean: Matrix::zeros(1, width),
            running_var: Matrix::filled(1, width, 1.0),
        }
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Linear { w, .. } => LayerSpec::Linear {
                inputs: w.cols(),
                outputs: w.rows(),
            },
            Layer::BatchNorm { gamma, .. } => LayerSpec::BatchNorm {
                width: gamma.cols(),
            },
            Layer::Relu => LayerSpec::Relu,
            Layer::Dropout { rate } => LayerSpec::Dropout { rate: *rate },
        }
    }

    pub(crate) fn params(&self) -> Vec<&Matrix> {
        match self {
            Layer::Linear { w, b } => vec![w, b],
            Layer::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            _ => Vec::new(),
        }
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Layer::Linear { w, b } => vec![w, b],
            Layer::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            _ => Vec::new(),
        }
    }
}

/// Per-layer state saved by a forward pass and consumed by the backward pass.
#[derive(Debug, Clone)]
pub(crate) enum LayerCache {
    Linear {
        input: Matrix,
    },
    BatchNorm {
        x_hat: Matrix,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    Relu {
        output: Matrix,
    },
    /// `None` when dropout acted as the identity.
    Dropout {
        mask: Option<Matrix>,
    },
}

pub(crate) fn linear_forward(w: &Matrix, b: &Matrix, x: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(x.rows(), w.rows());
    for i in 0..out.rows() {
        out.row_mut(i).copy_from_slice(b.data());
    }
    Matrix::gemm(1.0, x, Op::N, w, Op::T, 1.0, &mut out)?;
    Ok(out)
}

/// Returns `(dx, dw, db)`.
pub(crate) fn linear_backward(
    w: &Matrix,
    input: &Matrix,
    dy: &Matrix,
) -> Result<(Matrix, Matrix, Matrix)> {
    let dw = Matrix::matmul(dy, Op::T, input, Op::N)?;
    let mut db = Matrix::zeros(1, dy.cols());
    for r in dy.row_iter() {
        for (acc, v) in db.data_mut().iter_mut().zip(r) {
            *acc += v;
        }
    }
    let dx = Matrix::matmul(dy, Op::N, w, Op::N)?;
    Ok((dx, dw, db))
}

/// Per-feature mean and biased variance over the rows of `x`.
pub(crate) fn column_moments(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows() as f64;
    let mut mean = vec![0.0; x.cols()];
    for r in x.row_iter() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; x.cols()];
    for r in x.row_iter() {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

/// Normalises with the given statistics and applies the affine transform.
/// Returns `(y, x_hat)`.
pub(crate) fn batch_norm_apply(
    x: &Matrix,
    mean: &[f64],
    inv_std: &[f64],
    gamma: &Matrix,
    beta: &Matrix,
) -> (Matrix, Matrix) {
    let mut x_hat = x.clone();
    let mut y = x.clone();
    for i in 0..x.rows() {
        let xr = x_hat.row_mut(i);
        for (j, v) in xr.iter_mut().enumerate() {
            *v = (*v - mean[j]) * inv_std[j];
        }
        let yr = y.row_mut(i);
        for (j, v) in yr.iter_mut().enumerate() {
            *v = gamma.data()[j] * x_hat.get(i, j) + beta.data()[j];
        }
    }
    (y, x_hat)
}

/// Returns `(dx, dgamma, dbeta)`.
pub(crate) fn batch_norm_backward(
    gamma: &Matrix,
    x_hat: &Matrix,
    inv_std: &[f64],
    batch_stats: bool,
    dy: &Matrix,
) -> (Matrix, Matrix, Matrix) {
    let (n, width) = dy.shape();
    let mut dgamma = Matrix::zeros(1, width);
    let mut dbeta = Matrix::zeros(1, width);
    for i in 0..n {
        for j in 0..width {
            let g = dy.get(i, j);
            dgamma.data_mut()[j] += g * x_hat.get(i, j);
            dbeta.data_mut()[j] += g;
        }
    }
    let mut dx = Matrix::zeros(n, width);
    if batch_stats {
        // dx = inv_std / n * (n * dxh - sum(dxh) - x_hat * sum(dxh * x_hat)), dxh = dy * gamma
        let nf = n as f64;
        for j in 0..width {
            let g = gamma.data()[j];
            let sum_dxh = dbeta.data()[j] * g;
            let sum_dxh_xh = dgamma.data()[j] * g;
            for i in 0..n {
                let dxh = dy.get(i, j) * g;
                let v = inv_std[j] / nf * (nf * dxh - sum_dxh - x_hat.get(i, j) * sum_dxh_xh);
                dx.set(i, j, v);
            }
        }
    } else {
        for i in 0..n {
            for j in 0..width {
                dx.set(i, j, dy.get(i, j) * gamma.data()[j] * inv_std[j]);
            }
        }
    }
    (dx, dgamma, dbeta)
}

pub(crate) fn validate_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    Ok(())
}
