//! Excess-kurtosis estimation for the error entries and the choice of a
//! kurtosis-matched multiplier law for the bootstrap.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dimensions, ProjectionCache, RegressionDataset};
use crate::dist::ErrorDist;
use crate::error::{Error, Result};

/// Clamp range for the estimate: -2 is the universal lower bound for excess
/// kurtosis; 6 keeps the chi-squared multiplier at df >= 2.
pub const TAU_MIN: f64 = -1.999;
pub const TAU_MAX: f64 = 6.0;

/// Dead zone around zero inside which the normal multiplier is used.
pub const TAU_DEAD_ZONE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KurtosisEstimate {
    /// Unmodified estimate.
    pub raw_value: f64,
    /// Estimate clamped into `[TAU_MIN, TAU_MAX]` for sampler selection.
    pub tau_hat: f64,
    pub clamped: bool,
}

/// Diagonal of the residual projector, `Q_ii = 1 - x_i' G x_i`, without
/// materializing Q.
pub(crate) fn projector_diag(x: &DMatrix<f64>, gram_inverse: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows();
    if x.ncols() == 0 {
        return vec![1.0; n];
    }
    let m = x * gram_inverse;
    (0..n)
        .map(|i| 1.0 - m.row(i).dot(&x.row(i)))
        .collect()
}

/// Diagonal of `Y'QY` computed as `||y_i||^2 - (X'y_i)' G (X'y_i)`.
pub(crate) fn residual_gram_diag(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    gram_inverse: &DMatrix<f64>,
) -> Vec<f64> {
    let p = y.ncols();
    if x.ncols() == 0 {
        return (0..p).map(|i| y.column(i).norm_squared()).collect();
    }
    let xty = x.tr_mul(y);
    let solved = gram_inverse * &xty;
    (0..p)
        .map(|i| y.column(i).norm_squared() - xty.column(i).dot(&solved.column(i)))
        .collect()
}

pub(crate) fn tau_from_parts(
    w_diag: &[f64],
    tr_q_hadamard_sq: f64,
    dims: &Dimensions,
) -> Result<KurtosisEstimate> {
    if tr_q_hadamard_sq <= 0.0 {
        return Err(Error::Domain(
            "tr(Q o Q) must be positive; projector diagonal looks corrupted".to_string(),
        ));
    }
    let nk = (dims.n - dims.k) as f64;
    let p = dims.p as f64;
    let sum_sq: f64 = w_diag.iter().map(|d| (d - nk) * (d - nk)).sum();
    let raw = (sum_sq / p - 2.0 * nk) / tr_q_hadamard_sq;
    let tau_hat = raw.clamp(TAU_MIN, TAU_MAX);
    Ok(KurtosisEstimate {
        raw_value: raw,
        tau_hat,
        clamped: tau_hat != raw,
    })
}

/// Estimates the excess kurtosis of the error entries:
/// `{p^{-1} sum_i ((Y'QY)_ii - (n-k))^2 - 2(n-k)} / tr(Q o Q)`.
pub fn excess_kurtosis_estimate(
    ds: &RegressionDataset,
    cache: &ProjectionCache,
) -> Result<KurtosisEstimate> {
    let q_diag = projector_diag(ds.x(), &cache.gram_inverse);
    let tr_qq: f64 = q_diag.iter().map(|q| q * q).sum();
    let w_diag: Vec<f64> = cache.residual_gram.diagonal().iter().copied().collect();
    tau_from_parts(&w_diag, tr_qq, &ds.dims())
}

/// Which sign convention to use when inverting the Bernoulli kurtosis
/// relation `tau = 1/(rho(1-rho)) - 6`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BernoulliSignConvention {
    /// `rho(1-rho) = 1/(6 + tau)`, the algebraic inverse of the kurtosis
    /// formula; reproduces rho = (6 - sqrt 6)/12 at tau = -6/5.
    #[default]
    CorrectedPlus,
    /// `rho(1-rho) = 1/(6 - tau)`.
    PrintedMinus,
}

impl BernoulliSignConvention {
    pub fn label(&self) -> &'static str {
        match self {
            BernoulliSignConvention::CorrectedPlus => "plus",
            BernoulliSignConvention::PrintedMinus => "minus",
        }
    }
}

/// Multiplier law matched to an estimated excess kurtosis: normal inside the
/// dead zone, standardized chi-squared with `12/tau` degrees of freedom for
/// positive tau, standardized Bernoulli for negative tau.
pub fn matched_sampler(tau_hat: f64) -> Result<ErrorDist> {
    matched_sampler_with_convention(tau_hat, BernoulliSignConvention::CorrectedPlus)
}

pub fn matched_sampler_with_convention(
    tau_hat: f64,
    convention: BernoulliSignConvention,
) -> Result<ErrorDist> {
    if tau_hat <= -2.0 {
        return Err(Error::Domain(format!(
            "excess kurtosis {tau_hat} is below the attainable bound -2"
        )));
    }
    if tau_hat.abs() < TAU_DEAD_ZONE {
        return Ok(ErrorDist::StandardNormal);
    }
    if tau_hat > 0.0 {
        return Ok(ErrorDist::StandardizedChiSquared { df: 12.0 / tau_hat });
    }
    let denom = match convention {
        BernoulliSignConvention::CorrectedPlus => 6.0 + tau_hat,
        BernoulliSignConvention::PrintedMinus => 6.0 - tau_hat,
    };
    let pq = 1.0 / denom;
    if !(pq > 0.0 && pq <= 0.25) {
        return Err(Error::Domain(format!(
            "no Bernoulli parameter satisfies rho(1-rho) = {pq}"
        )));
    }
    let rho = 0.5 * (1.0 - (1.0 - 4.0 * pq).sqrt());
    Ok(ErrorDist::StandardizedBernoulli { rho })
}
