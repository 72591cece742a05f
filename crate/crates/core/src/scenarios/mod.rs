//! The seven synthetic location-scale benchmarks and their analytic quantile oracles.
//!
//! Every scenario draws `x ~ U[0,1]^d` and sets `y = f0(x) + s(x) * eps`, so the conditional
//! `tau`-quantile of each response coordinate is `f0(x) + s(x) * Q_eps(tau)` with `Q_eps` the
//! marginal noise quantile.
//!
//! | id | d  | p | location                              | scale              | noise            |
//! |----|----|---|---------------------------------------|--------------------|------------------|
//! | 1  | 2  | 1 | `g2(g1(x))`                           | `|x - (1/2, 1/2)|` | t(2)             |
//! | 2  | 2  | 1 | `x1^2 + x2^2`                         | 1                  | Laplace(0, 2)    |
//! | 3  | 2  | 1 | `sqrt(x1 + x2) + [x1 < 1/2]`          | `sqrt(x1 + x2/2)`  | t(2)             |
//! | 4  | 5  | 1 | `sqrt(x1 + ... + x5)`                 | 1                  | Laplace(0, 2)    |
//! | 5  | 10 | 1 | `g3(g2(g1(x)))`                       | 1                  | t(3)             |
//! | 6  | 2  | 2 | `g2(g1(x))`                           | 1                  | Mt(3, I2)        |
//! | 7  | 4  | 2 | `(|(x1, x2)|, |(x3, x4)|)`            | 1                  | Laplace(0, 2)^2  |

mod dataset;
mod noise;
pub mod special;

use std::f64::consts::PI;

use rand::Rng;

pub use dataset::{read_csv, write_csv, Dataset};
pub use noise::{
    laplace_quantile, noise_quantile, student_t2_quantile, student_t_quantile_numeric, NoiseKind,
    T_BRACKET, T_TOLERANCE,
};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// Identifier plus dimensions and noise law of one benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub id: u8,
    pub input_dim: usize,
    pub output_dim: usize,
    pub noise: NoiseKind,
}

impl Scenario {
    pub const IDS: [u8; 7] = [1, 2, 3, 4, 5, 6, 7];

    pub fn new(id: u8) -> Result<Self> {
        let (input_dim, output_dim, noise) = match id {
            1 => (2, 1, NoiseKind::StudentT { df: 2 }),
            2 => (2, 1, NoiseKind::Laplace { scale: 2.0 }),
            3 => (2, 1, NoiseKind::StudentT { df: 2 }),
            4 => (5, 1, NoiseKind::Laplace { scale: 2.0 }),
            5 => (10, 1, NoiseKind::StudentT { df: 3 }),
            6 => (2, 2, NoiseKind::MultivariateT { df: 3, dim: 2 }),
            7 => (4, 2, NoiseKind::LaplaceIid { scale: 2.0, dim: 2 }),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "scenario id must be in 1..=7, got {id}"
                )))
            }
        };
        Ok(Self {
            id,
            input_dim,
            output_dim,
            noise,
        })
    }

    pub fn is_multivariate(&self) -> bool {
        self.output_dim > 1
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::shape(
                "scenario covariate",
                format!("{} coordinates for scenario {}", self.input_dim, self.id),
                x.len(),
            ));
        }
        if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "covariates must lie in [0, 1], got {v}"
            )));
        }
        Ok(())
    }

    /// The location function `f0(x)`, one entry per response coordinate.
    pub fn location(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(match self.id {
            1 => {
                let (a, b) = (x[0].sqrt() + x[0] * x[1], (2.0 * PI * x[1]).cos());
                vec![sqrt_checked(a + b * b, 1)? + a * a * b]
            }
            2 => vec![x[0] * x[0] + x[1] * x[1]],
            3 => {
                let base = (x[0] + x[1]).sqrt();
                vec![if x[0] < 0.5 { base + 1.0 } else { base }]
            }
            4 => vec![x.iter().sum::<f64>().sqrt()],
            5 => {
                let total: f64 = x.iter().sum();
                let a = (x[0] * x[0] + x[1..].iter().sum::<f64>()).sqrt();
                let b = total.powi(3);
                let (c, d) = (a.abs(), b * a);
                vec![c + sqrt_checked(c + d, 5)?]
            }
            6 => {
                let (a, b) = (x[0].abs(), x[1] * x[0]);
                vec![sqrt_checked(b * b + a, 6)?, (a + b).powi(3)]
            }
            7 => vec![x[0].hypot(x[1]), x[2].hypot(x[3])],
            _ => unreachable!("validated in Scenario::new"),
        })
    }

    /// Noise multiplier `s(x)`.
    pub fn scale(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(match self.id {
            1 => (x[0] - 0.5).hypot(x[1] - 0.5),
            3 => (x[0] + 0.5 * x[1]).sqrt(),
            _ => 1.0,
        })
    }

    /// Conditional `tau`-quantile of every response coordinate at `x`.
    ///
    /// For the bivariate scenarios these are the marginal quantiles; at `tau = 0.5` they equal
    /// the location because both noise laws are symmetric.
    pub fn true_quantile(&self, x: &[f64], tau: f64) -> Result<Vec<f64>> {
        let q = noise_quantile(self.noise, tau)?;
        let s = self.scale(x)?;
        let mut loc = self.location(x)?;
        loc.iter_mut().for_each(|v| *v += s * q);
        Ok(loc)
    }

    /// Oracle quantiles for every row of `x`, shaped `(rows, output_dim)`.
    pub fn true_quantile_matrix(&self, x: &Matrix, tau: f64) -> Result<Matrix> {
        let q = noise_quantile(self.noise, tau)?;
        let mut out = Matrix::zeros(x.rows(), self.output_dim);
        for (i, row) in x.row_iter().enumerate() {
            let s = self.scale(row)?;
            let loc = self.location(row)?;
            for (o, l) in out.row_mut(i).iter_mut().zip(loc) {
                *o = l + s * q;
            }
        }
        Ok(out)
    }

    /// `n` independent uniform covariate rows.
    pub fn sample_covariates<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Matrix {
        Matrix::from_fn(n, self.input_dim, |_, _| rng.random::<f64>())
    }

    /// Responses for the given covariates.
    pub fn sample_responses<R: Rng + ?Sized>(&self, x: &Matrix, rng: &mut R) -> Result<Matrix> {
        let mut y = Matrix::zeros(x.rows(), self.output_dim);
        let mut eps = vec![0.0; self.output_dim];
        for (i, row) in x.row_iter().enumerate() {
            let loc = self.location(row)?;
            let s = self.scale(row)?;
            self.noise.sample_into(rng, &mut eps);
            for ((o, l), e) in y.row_mut(i).iter_mut().zip(loc).zip(&eps) {
                *o = l + s * e;
            }
        }
        Ok(y)
    }

    /// A seeded training set of size `n`.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidArgument("dataset size must be at least 1".into()));
        }
        let mut r = rng::stream(seed, "scenario-data");
        let x = self.sample_covariates(n, &mut r);
        let y = self.sample_responses(&x, &mut r)?;
        Ok(Dataset {
            x,
            y,
            scenario: Some(self.id),
            seed: Some(seed),
        })
    }
}

/// Shorthand for `Scenario::new(id)?.generate(n, seed)`.
pub fn generate(id: u8, n: usize, seed: u64) -> Result<Dataset> {
    Scenario::new(id)?.generate(n, seed)
}

fn sqrt_checked(v: f64, id: u8) -> Result<f64> {
    if v < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "scenario {id}: negative radicand {v} in the location function"
        )));
    }
    Ok(v.sqrt())
}
