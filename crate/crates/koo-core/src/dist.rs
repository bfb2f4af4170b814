//! Standardized error distributions used by the simulation harness and the
//! multiplier bootstrap.
//!
//! Every law is shifted and scaled to mean 0 and variance 1, so the only
//! distributional knob that survives standardization is the shape (in
//! particular the excess kurtosis).

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Poisson, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// An error law, standardized to mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ErrorDist {
    StandardNormal,
    StandardizedChiSquared { df: f64 },
    StandardizedBernoulli { rho: f64 },
    StandardizedT { df: f64 },
    StandardizedUniform,
    StandardizedPoisson { lambda: f64 },
    StandardizedExponential,
}

impl ErrorDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ErrorDist::StandardizedChiSquared { df } if !(df > 0.0 && df.is_finite()) => Err(
                Error::Domain(format!("chi-squared df must be positive, got {df}")),
            ),
            ErrorDist::StandardizedBernoulli { rho } if !(rho > 0.0 && rho < 1.0) => Err(
                Error::Domain(format!("bernoulli rho must lie in (0,1), got {rho}")),
            ),
            // Unit variance needs df > 2.
            ErrorDist::StandardizedT { df } if !(df > 2.0 && df.is_finite()) => Err(Error::Domain(
                format!("t df must exceed 2 for unit variance, got {df}"),
            )),
            ErrorDist::StandardizedPoisson { lambda } if !(lambda > 0.0 && lambda.is_finite()) => {
                Err(Error::Domain(format!(
                    "poisson lambda must be positive, got {lambda}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Short human-readable tag used in reports.
    pub fn label(&self) -> String {
        match *self {
            ErrorDist::StandardNormal => "normal".to_string(),
            ErrorDist::StandardizedChiSquared { df } => format!("chisq({df})"),
            ErrorDist::StandardizedBernoulli { rho } => format!("bernoulli({rho})"),
            ErrorDist::StandardizedT { df } => format!("t({df})"),
            ErrorDist::StandardizedUniform => "uniform".to_string(),
            ErrorDist::StandardizedPoisson { lambda } => format!("poisson({lambda})"),
            ErrorDist::StandardizedExponential => "exponential".to_string(),
        }
    }

    /// Excess kurtosis of the standardized law, when the fourth moment is
    /// finite (`None` for t with df <= 4).
    pub fn excess_kurtosis(&self) -> Option<f64> {
        match *self {
            ErrorDist::StandardNormal => Some(0.0),
            ErrorDist::StandardizedChiSquared { df } => Some(12.0 / df),
            ErrorDist::StandardizedBernoulli { rho } => Some(1.0 / (rho * (1.0 - rho)) - 6.0),
            ErrorDist::StandardizedT { df } => {
                if df > 4.0 {
                    Some(6.0 / (df - 4.0))
                } else {
                    None
                }
            }
            ErrorDist::StandardizedUniform => Some(-1.2),
            ErrorDist::StandardizedPoisson { lambda } => Some(1.0 / lambda),
            ErrorDist::StandardizedExponential => Some(6.0),
        }
    }

    /// True when the third moment of the law is zero.
    pub fn is_symmetric(&self) -> bool {
        matches!(
            self,
            ErrorDist::StandardNormal | ErrorDist::StandardizedT { .. } | ErrorDist::StandardizedUniform
        )
    }

    /// Builds a reusable sampler (validates parameters once).
    pub fn sampler(&self) -> Result<Standardized> {
        self.validate()?;
        let inner = match *self {
            ErrorDist::StandardNormal => Inner::Normal,
            ErrorDist::StandardizedChiSquared { df } => Inner::ChiSquared {
                dist: ChiSquared::new(df)
                    .map_err(|e| Error::Domain(format!("chi-squared sampler: {e}")))?,
                mean: df,
                inv_sd: 1.0 / (2.0 * df).sqrt(),
            },
            ErrorDist::StandardizedBernoulli { rho } => {
                let sd = (rho * (1.0 - rho)).sqrt();
                Inner::Bernoulli {
                    rho,
                    hi: (1.0 - rho) / sd,
                    lo: -rho / sd,
                }
            }
            ErrorDist::StandardizedT { df } => Inner::T {
                dist: StudentT::new(df).map_err(|e| Error::Domain(format!("t sampler: {e}")))?,
                inv_sd: ((df - 2.0) / df).sqrt(),
            },
            ErrorDist::StandardizedUniform => Inner::Uniform,
            ErrorDist::StandardizedPoisson { lambda } => Inner::Poisson {
                dist: Poisson::new(lambda)
                    .map_err(|e| Error::Domain(format!("poisson sampler: {e}")))?,
                lambda,
                inv_sd: 1.0 / lambda.sqrt(),
            },
            ErrorDist::StandardizedExponential => Inner::Exponential,
        };
        Ok(Standardized { inner })
    }

    /// Draws an n x p matrix with i.i.d. standardized entries.
    pub fn fill<R: Rng + ?Sized>(&self, n: usize, p: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        let sampler = self.sampler()?;
        Ok(DMatrix::from_fn(n, p, |_, _| sampler.sample(rng)))
    }
}

/// A prepared sampler for one standardized law.
#[derive(Debug, Clone)]
pub struct Standardized {
    inner: Inner,
}

#[derive(Debug, Clone)]
enum Inner {
    Normal,
    ChiSquared {
        dist: ChiSquared<f64>,
        mean: f64,
        inv_sd: f64,
    },
    Bernoulli {
        rho: f64,
        hi: f64,
        lo: f64,
    },
    T {
        dist: StudentT<f64>,
        inv_sd: f64,
    },
    Uniform,
    Poisson {
        dist: Poisson<f64>,
        lambda: f64,
        inv_sd: f64,
    },
    Exponential,
}

impl Standardized {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.inner {
            Inner::Normal => rng.sample(StandardNormal),
            Inner::ChiSquared { dist, mean, inv_sd } => (dist.sample(rng) - mean) * inv_sd,
            Inner::Bernoulli { rho, hi, lo } => {
                if rng.random::<f64>() < *rho {
                    *hi
                } else {
                    *lo
                }
            }
            Inner::T { dist, inv_sd } => dist.sample(rng) * inv_sd,
            Inner::Uniform => (2.0 * rng.random::<f64>() - 1.0) * SQRT_3,
            Inner::Poisson {
                dist,
                lambda,
                inv_sd,
            } => (dist.sample(rng) - lambda) * inv_sd,
            Inner::Exponential => {
                let e: f64 = rng.sample(Exp1);
                e - 1.0
            }
        }
    }
}
