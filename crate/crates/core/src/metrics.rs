//! Evaluation metrics against oracle quantiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// `min(|t|, t^2)`: quadratic near zero, linear in the tails.
#[inline]
pub fn d2(t: f64) -> f64 {
    t.abs().min(t * t)
}

fn check_lengths(context: &'static str, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(context, a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument(format!("{context}: empty input")));
    }
    Ok(())
}

/// Mean of [`d2`] over pointwise differences.
pub fn delta_n2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths("delta_n2", pred, truth)?;
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| d2(p - t)).sum();
    Ok(s / pred.len() as f64)
}

/// Mean squared pointwise difference.
pub fn quantile_mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths("quantile_mse", pred, truth)?;
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(s / pred.len() as f64)
}

/// Squared error averaged over all `n * p` entries.
pub fn multivariate_mse(pred: &Matrix, truth: &Matrix) -> Result<f64> {
    pred.check_same_shape("multivariate_mse", truth)?;
    quantile_mse(pred.data(), truth.data())
}

pub fn mean_abs_error(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths("mean_abs_error", pred, truth)?;
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(s / pred.len() as f64)
}

/// Fraction of responses at or below the prediction.
pub fn coverage(y: &[f64], pred: &[f64]) -> Result<f64> {
    check_lengths("coverage", y, pred)?;
    let hits = y.iter().zip(pred).filter(|(y, p)| y <= p).count();
    Ok(hits as f64 / y.len() as f64)
}

/// Number of adjacent column pairs where a lower level exceeds the next one.
pub fn crossing_count(preds: &Matrix) -> usize {
    preds
        .row_iter()
        .map(|r| r.windows(2).filter(|w| w[0] > w[1]).count())
        .sum()
}

/// Metrics of one fitted quantile level on a test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    pub delta_n2: f64,
    pub coverage: f64,
    pub crossings: usize,
    pub n_test: usize,
}

impl EvalReport {
    /// Scores `pred` against `truth` (both `n x p`) and `y` (held-out responses).
    pub fn score(pred: &Matrix, truth: &Matrix, y: &Matrix, crossings: usize) -> Result<Self> {
        pred.check_same_shape("EvalReport::score", truth)?;
        pred.check_same_shape("EvalReport::score", y)?;
        Ok(Self {
            mse: multivariate_mse(pred, truth)?,
            delta_n2: delta_n2(pred.data(), truth.data())?,
            coverage: coverage(y.data(), pred.data())?,
            crossings,
            n_test: pred.rows(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn d2_examples() {
        assert_eq!(d2(0.5), 0.25);
        assert_eq!(d2(2.0), 2.0);
        assert_eq!(d2(0.0), 0.0);
        assert_eq!(d2(-2.0), 2.0);
    }

    #[test]
    fn delta_examples() {
        let t = [1.0, -3.0, 0.5];
        assert_eq!(delta_n2(&t, &t).unwrap(), 0.0);
        assert_eq!(delta_n2(&[0.5, 2.0], &[0.0, 0.0]).unwrap(), 1.125);
        assert_eq!(delta_n2(&[3.0, 4.0], &[0.0, 1.0]).unwrap(), 3.0);
        assert!(delta_n2(&[1.0], &[1.0, 2.0]).is_err());
        assert!(delta_n2(&[], &[]).is_err());
    }

    #[test]
    fn mse_examples() {
        let a = [0.3, -1.2, 5.0];
        assert_eq!(quantile_mse(&a, &a).unwrap(), 0.0);
        let shifted: Vec<f64> = a.iter().map(|v| v + 0.75).collect();
        assert!((quantile_mse(&shifted, &a).unwrap() - 0.5625).abs() < 1e-15);

        let p = [0.1, 0.7, -2.3, 4.4, 0.0];
        let t = [1.0, 0.2, -2.0, 3.1, -0.6];
        let mut brute = 0.0;
        for i in 0..5 {
            brute += (p[i] - t[i]) * (p[i] - t[i]);
        }
        assert!((quantile_mse(&p, &t).unwrap() - brute / 5.0).abs() < 1e-15);

        let pm = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let tm = Matrix::from_rows(&[[1.0, 0.0], [3.0, 5.0]]).unwrap();
        assert_eq!(multivariate_mse(&pm, &tm).unwrap(), 5.0 / 4.0);
    }

    #[test]
    fn coverage_examples() {
        let y = [0.1, -3.0, 7.0, 2.0];
        assert_eq!(coverage(&y, &[1e300; 4]).unwrap(), 1.0);
        assert_eq!(coverage(&y, &[-1e300; 4]).unwrap(), 0.0);
        assert_eq!(coverage(&y, &[0.1, 0.0, 0.0, 2.0]).unwrap(), 0.75);
    }

    #[test]
    fn crossing_examples() {
        assert_eq!(crossing_count(&Matrix::from_rows(&[[1.0, 0.0]]).unwrap()), 1);
        assert_eq!(crossing_count(&Matrix::from_rows(&[[0.0, 1.0, 1.0, 2.0]]).unwrap()), 0);
        let h = Matrix::from_fn(50, 5, |i, j| ((i * 31 + j * 17) % 13) as f64 - 6.0);
        assert_eq!(crossing_count(&crate::losses::composite_predict(&h)), 0);
    }

    proptest! {
        #[test]
        fn d2_bounds(t in -1e4f64..1e4) {
            prop_assert_eq!(d2(t), d2(-t));
            prop_assert!(d2(t) <= t * t);
            prop_assert!(d2(t) <= t.abs());
        }

        #[test]
        fn delta_bounded_by_mse_or_mae(
            diffs in proptest::collection::vec(-20.0f64..20.0, 1..30),
        ) {
            let zeros = vec![0.0; diffs.len()];
            let delta = delta_n2(&diffs, &zeros).unwrap();
            let mse = quantile_mse(&diffs, &zeros).unwrap();
            let mae = mean_abs_error(&diffs, &zeros).unwrap();
            prop_assert!(delta <= mse.max(mae) + 1e-12);
            if diffs.iter().all(|d| d.abs() >= 1.0) {
                prop_assert!(delta <= mse + 1e-12);
            }
            if diffs.iter().all(|d| d.abs() <= 1.0) {
                prop_assert!(delta <= mae + 1e-12);
            }
        }
    }
}
