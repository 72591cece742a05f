use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use super::special::{bisect_quantile, student_t_cdf};
use crate::error::{Error, Result};
use crate::losses::check_tau;

/// Bisection bracket and tolerance for numerically inverted Student-t quantiles.
pub const T_BRACKET: f64 = 1e6;
pub const T_TOLERANCE: f64 = 1e-12;

/// Zero-centred heavy-tailed error laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseKind {
    StudentT { df: u32 },
    Laplace { scale: f64 },
    /// `z / sqrt(chi2_df / df)` with `z ~ N(0, I_dim)` and one shared chi-square draw.
    MultivariateT { df: u32, dim: usize },
    /// Independent Laplace coordinates.
    LaplaceIid { scale: f64, dim: usize },
}

impl NoiseKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseKind::StudentT { df } | NoiseKind::MultivariateT { df, .. } => df >= 1,
            NoiseKind::Laplace { scale } | NoiseKind::LaplaceIid { scale, .. } => {
                scale > 0.0 && scale.is_finite()
            }
        };
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid noise law {self:?}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match *self {
            NoiseKind::StudentT { .. } | NoiseKind::Laplace { .. } => 1,
            NoiseKind::MultivariateT { dim, .. } | NoiseKind::LaplaceIid { dim, .. } => dim,
        }
    }

    /// Draws one noise vector of length [`NoiseKind::dim`] into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        match *self {
            NoiseKind::StudentT { df } | NoiseKind::MultivariateT { df, .. } => {
                for o in out.iter_mut() {
                    *o = StandardNormal.sample(rng);
                }
                let chi = ChiSquared::new(f64::from(df)).expect("df >= 1");
                let w: f64 = chi.sample(rng);
                let s = (w / f64::from(df)).sqrt().recip();
                out.iter_mut().for_each(|o| *o *= s);
            }
            NoiseKind::Laplace { scale } | NoiseKind::LaplaceIid { scale, .. } => {
                for o in out.iter_mut() {
                    let u: f64 = Open01.sample(rng);
                    *o = laplace_quantile(scale, u);
                }
            }
        }
    }
}

/// Inverse CDF of `Laplace(0, scale)`.
pub fn laplace_quantile(scale: f64, tau: f64) -> f64 {
    if tau < 0.5 {
        scale * (2.0 * tau).ln()
    } else {
        -scale * (2.0 * (1.0 - tau)).ln()
    }
}

/// `(2τ - 1) / sqrt(2τ(1 - τ))`, the inverse CDF of Student's t with two degrees of freedom.
pub fn student_t2_quantile(tau: f64) -> f64 {
    (2.0 * tau - 1.0) / (2.0 * tau * (1.0 - tau)).sqrt()
}

/// Student-t inverse CDF by bisection on the incomplete-beta CDF.
pub fn student_t_quantile_numeric(df: f64, tau: f64) -> f64 {
    if tau == 0.5 {
        return 0.0;
    }
    bisect_quantile(
        |q| student_t_cdf(q, df),
        tau,
        -T_BRACKET,
        T_BRACKET,
        T_TOLERANCE,
    )
}

/// Marginal `tau`-quantile of one noise coordinate.
pub fn noise_quantile(kind: NoiseKind, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    kind.validate()?;
    Ok(match kind {
        NoiseKind::Laplace { scale } | NoiseKind::LaplaceIid { scale, .. } => {
            laplace_quantile(scale, tau)
        }
        NoiseKind::StudentT { df: 2 } | NoiseKind::MultivariateT { df: 2, .. } => {
            student_t2_quantile(tau)
        }
        NoiseKind::StudentT { df } | NoiseKind::MultivariateT { df, .. } => {
            student_t_quantile_numeric(f64::from(df), tau)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    const TAUS: [f64; 19] = [
        0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8,
        0.85, 0.9, 0.95,
    ];

    #[test]
    fn laplace_quantile_examples() {
        let q = noise_quantile(NoiseKind::Laplace { scale: 2.0 }, 0.75).unwrap();
        assert!((q - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((q - 1.386294).abs() < 1e-6);
        assert_eq!(noise_quantile(NoiseKind::Laplace { scale: 2.0 }, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn student_t_examples() {
        let q = noise_quantile(NoiseKind::StudentT { df: 2 }, 0.95).unwrap();
        assert!((q - 2.919986).abs() < 1e-6);
        let numeric = student_t_quantile_numeric(2.0, 0.95);
        assert!((q - numeric).abs() < 1e-9);

        assert_eq!(noise_quantile(NoiseKind::StudentT { df: 3 }, 0.5).unwrap(), 0.0);
        let q3 = noise_quantile(NoiseKind::StudentT { df: 3 }, 0.95).unwrap();
        assert!((q3 - 2.353363).abs() < 1e-6, "{q3}");
    }

    #[test]
    fn t3_quantile_cross_checked_with_statrs() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        let d = StudentsT::new(0.0, 1.0, 3.0).unwrap();
        for tau in TAUS {
            let q = noise_quantile(NoiseKind::StudentT { df: 3 }, tau).unwrap();
            assert!((d.cdf(q) - tau).abs() < 1e-11);
        }
    }

    #[test]
    fn symmetric_laws_are_odd_and_centred() {
        let kinds = [
            NoiseKind::StudentT { df: 2 },
            NoiseKind::StudentT { df: 3 },
            NoiseKind::Laplace { scale: 2.0 },
            NoiseKind::MultivariateT { df: 3, dim: 2 },
            NoiseKind::LaplaceIid { scale: 2.0, dim: 2 },
        ];
        for k in kinds {
            assert_eq!(noise_quantile(k, 0.5).unwrap(), 0.0);
            for tau in TAUS {
                let a = noise_quantile(k, tau).unwrap();
                let b = noise_quantile(k, 1.0 - tau).unwrap();
                assert!((a + b).abs() < 1e-10, "{k:?} tau={tau}");
            }
        }
    }

    #[test]
    fn rejects_bad_levels_and_laws() {
        assert!(noise_quantile(NoiseKind::StudentT { df: 2 }, 0.0).is_err());
        assert!(noise_quantile(NoiseKind::StudentT { df: 2 }, 1.0).is_err());
        assert!(noise_quantile(NoiseKind::Laplace { scale: -1.0 }, 0.5).is_err());
    }

    #[test]
    fn t2_sample_cdf_matches_closed_form_quantiles() {
        let n = 1_000_000;
        let mut r = rng::from_seed(2024);
        let kind = NoiseKind::StudentT { df: 2 };
        let mut buf = [0.0];
        let mut draws: Vec<f64> = (0..n)
            .map(|_| {
                kind.sample_into(&mut r, &mut buf);
                buf[0]
            })
            .collect();
        draws.sort_by(f64::total_cmp);
        for tau in TAUS {
            let q = student_t2_quantile(tau);
            let below = draws.partition_point(|&d| d <= q) as f64 / n as f64;
            let tol = 3.0 * (tau * (1.0 - tau) / n as f64).sqrt();
            assert!((below - tau).abs() <= tol, "tau={tau} ecdf={below}");
        }
    }

    #[test]
    fn multivariate_t_shares_the_mixing_draw() {
        // With a shared chi-square draw, |e1| and |e2| are positively correlated even though
        // the coordinates are uncorrelated.
        let kind = NoiseKind::MultivariateT { df: 3, dim: 2 };
        let mut r = rng::from_seed(8);
        let mut buf = [0.0; 2];
        let n = 200_000;
        let (mut sa, mut sb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            kind.sample_into(&mut r, &mut buf);
            let (a, b) = (buf[0].abs().min(50.0), buf[1].abs().min(50.0));
            sa += a;
            sb += b;
            sab += a * b;
            saa += a * a;
            sbb += b * b;
        }
        let nf = n as f64;
        let cov = sab / nf - sa * sb / nf / nf;
        let corr = cov / ((saa / nf - (sa / nf).powi(2)) * (sbb / nf - (sb / nf).powi(2))).sqrt();
        assert!(corr > 0.1, "corr = {corr}");
    }
}
