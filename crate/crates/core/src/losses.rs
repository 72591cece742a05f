//! Training objectives and their gradients with respect to network outputs.
//!
//! Every batch loss is averaged over rows and returns `(loss, d loss / d output)` with the
//! gradient shaped like the network output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Residual norms below this are treated as zero by [`geometric_loss`].
pub const GEOMETRIC_ZERO_NORM: f64 = 1e-12;

/// Strictly increasing quantile levels in `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileLevels(Vec<f64>);

impl QuantileLevels {
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::InvalidArgument("no quantile levels given".into()));
        }
        for &t in &taus {
            check_tau(t)?;
        }
        if taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "quantile levels must be strictly increasing: {taus:?}"
            )));
        }
        Ok(Self(taus))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
}

impl TryFrom<Vec<f64>> for QuantileLevels {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QuantileLevels> for Vec<f64> {
    fn from(q: QuantileLevels) -> Self {
        q.0
    }
}

/// Direction of a geometric quantile, inside the closed Euclidean unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionU(Vec<f64>);

impl DirectionU {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "direction must satisfy |u| <= 1, got |u| = {norm}"
            )));
        }
        Ok(Self(u))
    }

    /// The zero direction, whose geometric quantile is the L1-median.
    pub fn median(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level must lie in (0, 1), got {tau}"
        )));
    }
    Ok(())
}

/// `max(tau * r, (tau - 1) * r)`.
pub fn pinball(tau: f64, residual: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(pinball_unchecked(tau, residual))
}

#[inline]
fn pinball_unchecked(tau: f64, r: f64) -> f64 {
    (tau * r).max((tau - 1.0) * r)
}

/// Derivative of `pinball(tau, y - f)` with respect to `f`; ties take the `y <= f` branch.
#[inline]
pub fn pinball_grad(tau: f64, y: f64, f: f64) -> f64 {
    if y <= f {
        1.0 - tau
    } else {
        -tau
    }
}

/// `log(1 + e^t)` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Logistic function, the derivative of [`softplus`].
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Maps raw heads to monotone quantiles: `q0 = h0`, `qj = q(j-1) + softplus(hj)`.
pub fn composite_predict(h: &Matrix) -> Matrix {
    let mut q = h.clone();
    for i in 0..q.rows() {
        let row = q.row_mut(i);
        for j in 1..row.len() {
            row[j] = row[j - 1] + softplus(row[j]);
        }
    }
    q
}

fn check_shapes(context: &'static str, y: &Matrix, f: &Matrix) -> Result<()> {
    y.check_same_shape(context, f)?;
    if y.rows() == 0 {
        return Err(Error::InvalidArgument(format!("{context}: empty batch")));
    }
    Ok(())
}

/// Mean pinball loss of a single quantile column.
pub fn pinball_loss(tau: f64, y: &Matrix, f: &Matrix) -> Result<(f64, Matrix)> {
    check_tau(tau)?;
    check_shapes("pinball_loss", y, f)?;
    if f.cols() != 1 {
        return Err(Error::shape("pinball_loss", "1 column", f.cols()));
    }
    marginal_loss(tau, y, f)
}

/// Joint loss of the cumulative-softplus model: level `taus[j]` scores column `j` of
/// [`composite_predict`]`(h)`.
pub fn composite_loss(y: &Matrix, h: &Matrix, taus: &QuantileLevels) -> Result<(f64, Matrix)> {
    if y.cols() != 1 || y.rows() != h.rows() {
        return Err(Error::shape(
            "composite_loss",
            format!("y of {}x1", h.rows()),
            format!("{}x{}", y.rows(), y.cols()),
        ));
    }
    if h.cols() != taus.len() {
        return Err(Error::shape("composite_loss", format!("{} heads", taus.len()), h.cols()));
    }
    if h.rows() == 0 {
        return Err(Error::InvalidArgument("composite_loss: empty batch".into()));
    }
    let n = h.rows() as f64;
    let q = composite_predict(h);
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(h.rows(), h.cols());
    let mut dq = vec![0.0; h.cols()];
    for i in 0..h.rows() {
        let yi = y.get(i, 0);
        for (j, tau) in taus.iter().enumerate() {
            let qij = q.get(i, j);
            loss += pinball_unchecked(tau, yi - qij);
            dq[j] = pinball_grad(tau, yi, qij) / n;
        }
        // Suffix sums: d q_j / d h_l = sigmoid(h_l) for every j >= l >= 1, and 1 for l = 0.
        let mut suffix = 0.0;
        let row = grad.row_mut(i);
        for l in (0..h.cols()).rev() {
            suffix += dq[l];
            row[l] = if l == 0 {
                suffix
            } else {
                suffix * sigmoid(h.get(i, l))
            };
        }
    }
    Ok((loss / n, grad))
}

/// `mean_i ( |r_i| + r_i . u )` with `r_i = y_i - f_i`.
pub fn geometric_loss(u: &DirectionU, y: &Matrix, f: &Matrix) -> Result<(f64, Matrix)> {
    check_shapes("geometric_loss", y, f)?;
    if u.dim() != y.cols() {
        return Err(Error::shape("geometric_loss", format!("direction of dim {}", y.cols()), u.dim()));
    }
    let n = y.rows() as f64;
    let u = u.as_slice();
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(y.rows(), y.cols());
    for i in 0..y.rows() {
        let (yr, fr) = (y.row(i), f.row(i));
        let norm = yr
            .iter()
            .zip(fr)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let dot: f64 = yr.iter().zip(fr).zip(u).map(|((a, b), c)| (a - b) * c).sum();
        loss += norm + dot;
        let g = grad.row_mut(i);
        for j in 0..g.len() {
            let unit = if norm < GEOMETRIC_ZERO_NORM {
                0.0
            } else {
                (yr[j] - fr[j]) / norm
            };
            g[j] = -(unit + u[j]) / n;
        }
    }
    Ok((loss / n, grad))
}

/// Pinball loss at a common level summed over output coordinates and averaged over rows.
pub fn marginal_loss(tau: f64, y: &Matrix, f: &Matrix) -> Result<(f64, Matrix)> {
    check_tau(tau)?;
    check_shapes("marginal_loss", y, f)?;
    let n = y.rows() as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(y.rows(), y.cols());
    for ((g, &yv), &fv) in grad.data_mut().iter_mut().zip(y.data()).zip(f.data()) {
        loss += pinball_unchecked(tau, yv - fv);
        *g = pinball_grad(tau, yv, fv) / n;
    }
    Ok((loss / n, grad))
}

/// `mean_i |y_i - f_i|^2`.
pub fn squared_loss(y: &Matrix, f: &Matrix) -> Result<(f64, Matrix)> {
    check_shapes("squared_loss", y, f)?;
    let n = y.rows() as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(y.rows(), y.cols());
    for ((g, &yv), &fv) in grad.data_mut().iter_mut().zip(y.data()).zip(f.data()) {
        let r = yv - fv;
        loss += r * r;
        *g = -2.0 * r / n;
    }
    Ok((loss / n, grad))
}

/// Objective selector used by training and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub enum LossKind {
    /// Single-level pinball on a univariate response.
    Pinball { tau: f64 },
    /// Cumulative-softplus joint model over several levels.
    Composite(QuantileLevels),
    Squared,
    Geometric(DirectionU),
    Marginal { tau: f64 },
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Pinball { .. } => "pinball",
            LossKind::Composite(_) => "composite",
            LossKind::Squared => "sqerr",
            LossKind::Geometric(_) => "geometric",
            LossKind::Marginal { .. } => "marginal",
        }
    }

    /// Network output width for a response with `response_dim` columns.
    pub fn output_dim(&self, response_dim: usize) -> Result<usize> {
        match self {
            LossKind::Pinball { .. } | LossKind::Composite(_) if response_dim != 1 => Err(
                Error::Unsupported(format!("{} loss needs a univariate response", self.name())),
            ),
            LossKind::Pinball { .. } => Ok(1),
            LossKind::Composite(levels) => Ok(levels.len()),
            LossKind::Geometric(u) if u.dim() != response_dim => Err(Error::shape(
                "geometric loss",
                format!("direction of dim {response_dim}"),
                u.dim(),
            )),
            _ => Ok(response_dim),
        }
    }

    pub fn evaluate(&self, y: &Matrix, out: &Matrix) -> Result<(f64, Matrix)> {
        match self {
            LossKind::Pinball { tau } => pinball_loss(*tau, y, out),
            LossKind::Composite(levels) => composite_loss(y, out, levels),
            LossKind::Squared => squared_loss(y, out),
            LossKind::Geometric(u) => geometric_loss(u, y, out),
            LossKind::Marginal { tau } => marginal_loss(*tau, y, out),
        }
    }

    /// `{"kind": .., "tau" | "taus" | "u": ..}`.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            LossKind::Pinball { tau } => json!({ "kind": "pinball", "tau": tau }),
            LossKind::Composite(levels) => json!({ "kind": "composite", "taus": levels.as_slice() }),
            LossKind::Squared => json!({ "kind": "sqerr" }),
            LossKind::Geometric(u) => json!({ "kind": "geometric", "u": u.as_slice() }),
            LossKind::Marginal { tau } => json!({ "kind": "marginal", "tau": tau }),
        }
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let bad = |what: &str| Error::parse(format!("$.loss.{what}"), "missing or malformed");
        let num = |k: &str| v.get(k).and_then(|t| t.as_f64()).ok_or_else(|| bad(k));
        let list = |k: &str| -> Result<Vec<f64>> {
            v.get(k)
                .and_then(|t| t.as_array())
                .and_then(|a| a.iter().map(|t| t.as_f64()).collect::<Option<Vec<_>>>())
                .ok_or_else(|| bad(k))
        };
        match v.get("kind").and_then(|k| k.as_str()) {
            Some("pinball") => {
                let tau = num("tau")?;
                check_tau(tau)?;
                Ok(LossKind::Pinball { tau })
            }
            Some("composite") => Ok(LossKind::Composite(QuantileLevels::new(list("taus")?)?)),
            Some("sqerr") => Ok(LossKind::Squared),
            Some("geometric") => Ok(LossKind::Geometric(DirectionU::new(list("u")?)?)),
            Some("marginal") => {
                let tau = num("tau")?;
                check_tau(tau)?;
                Ok(LossKind::Marginal { tau })
            }
            Some(other) => Err(Error::parse("$.loss.kind", format!("unknown loss {other:?}"))),
            None => Err(bad("kind")),
        }
    }

    /// Levels estimated by each output column; `None` for the squared-error mean.
    pub fn levels(&self, response_dim: usize) -> Vec<Option<f64>> {
        match self {
            LossKind::Pinball { tau } => vec![Some(*tau)],
            LossKind::Composite(levels) => levels.iter().map(Some).collect(),
            LossKind::Squared => vec![None; response_dim],
            LossKind::Geometric(_) => vec![Some(0.5); response_dim],
            LossKind::Marginal { tau } => vec![Some(*tau); response_dim],
        }
    }

    /// Converts raw network output to predictions on the response scale.
    pub fn predict(&self, out: &Matrix) -> Matrix {
        match self {
            LossKind::Composite(_) => composite_predict(out),
            _ => out.clone(),
        }
    }
}
