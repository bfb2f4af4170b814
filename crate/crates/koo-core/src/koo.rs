//! The knock-one-out statistics and their asymptotic companions.
//!
//! The statistic of predictor `j` is the quadratic form
//! `K_j = (Y'a_j)' W^{-1} (Y'a_j)` with `W = Y'QY`, which needs no knowledge
//! of the error covariance. One Cholesky factorization of `W` is shared
//! across all `k` quadratic forms.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::dataset::{Dimensions, GramFactor, ProjectionCache, RegressionDataset};
use crate::dist::ErrorDist;
use crate::error::{Error, Result};

/// Knock-one-out statistics of every candidate predictor.
#[derive(Debug, Clone)]
pub struct KooProfile {
    /// K_j for j = 0..k.
    pub kappa: Vec<f64>,
    pub dims: Dimensions,
    /// Shared limit of the spurious statistics.
    pub spurious_limit: f64,
}

/// A data-generating truth: support, coefficients, error covariance and law.
#[derive(Debug, Clone)]
pub struct TrueModelSpec {
    pub support: Vec<usize>,
    /// k x p coefficient matrix; rows outside the support are zero.
    pub coeffs: DMatrix<f64>,
    /// p x p error covariance.
    pub sigma: DMatrix<f64>,
    pub error_law: ErrorDist,
}

impl TrueModelSpec {
    pub fn new(
        support: Vec<usize>,
        coeffs: DMatrix<f64>,
        sigma: DMatrix<f64>,
        error_law: ErrorDist,
    ) -> Result<Self> {
        let k = coeffs.nrows();
        let mut support = support;
        support.sort_unstable();
        support.dedup();
        if support.iter().any(|&j| j >= k) {
            return Err(Error::Dimension("support index out of range".to_string()));
        }
        for j in 0..k {
            if !support.contains(&j) && coeffs.row(j).iter().any(|&v| v != 0.0) {
                return Err(Error::Data(format!(
                    "coefficient row {j} outside the support is nonzero"
                )));
            }
        }
        if sigma.nrows() != sigma.ncols() || sigma.nrows() != coeffs.ncols() {
            return Err(Error::Dimension("sigma shape mismatch".to_string()));
        }
        if (sigma.transpose() - &sigma).amax() > 1e-10 {
            return Err(Error::Data("sigma is not symmetric".to_string()));
        }
        if sigma.clone().cholesky().is_none() {
            return Err(Error::Rank("sigma is not positive definite".to_string()));
        }
        error_law.validate()?;
        Ok(TrueModelSpec {
            support,
            coeffs,
            sigma,
            error_law,
        })
    }
}

/// Fluctuation-side quantities of one predictor.
#[derive(Debug, Clone)]
pub struct CltQuantities {
    pub delta: f64,
    pub g_q: DMatrix<f64>,
    pub sigma_true_sq: f64,
}

/// Quadratic forms `b_j' W^{-1} b_j` for every column of `b`, through one
/// shared factorization of `w`.
pub(crate) fn quadform_stats(b: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = w.clone().cholesky().ok_or_else(|| {
        Error::Singular("Y'QY is not positive definite (n too small or degenerate Y)".to_string())
    })?;
    let solved = chol.solve(b);
    Ok((0..b.ncols())
        .map(|j| b.column(j).dot(&solved.column(j)))
        .collect())
}

/// Computes all knock-one-out statistics of a dataset.
pub fn koo_statistics(ds: &RegressionDataset, cache: &ProjectionCache) -> Result<KooProfile> {
    let dims = ds.dims();
    let b = ds.y().tr_mul(&cache.knockout_dirs);
    let kappa = quadform_stats(&b, &cache.residual_gram)?;
    Ok(KooProfile {
        kappa,
        dims,
        spurious_limit: dims.spurious_limit(),
    })
}

/// Log-likelihood-ratio scale statistics `A_j = log(1 + K_j)`.
pub fn log_lr_statistics(profile: &KooProfile) -> Vec<f64> {
    profile.kappa.iter().map(|k| k.ln_1p()).collect()
}

/// Lawley-Hotelling scale statistics `C_j = p + K_j`.
pub fn lawley_hotelling_statistics(profile: &KooProfile) -> Vec<f64> {
    let p = profile.dims.p as f64;
    profile.kappa.iter().map(|k| p + k).collect()
}

fn check_ratios(c_n: f64, alpha_n: f64) -> Result<()> {
    let ok = c_n > 0.0 && c_n < 1.0 && (0.0..1.0).contains(&alpha_n) && c_n + alpha_n < 1.0;
    if !ok {
        return Err(Error::Domain(format!(
            "need c_n in (0,1), alpha_n in [0,1) and c_n + alpha_n < 1, got c_n={c_n}, alpha_n={alpha_n}"
        )));
    }
    Ok(())
}

/// Limit of the spurious statistics, `c_n / (1 - c_n - alpha_n)`.
pub fn spurious_limit(c_n: f64, alpha_n: f64) -> Result<f64> {
    check_ratios(c_n, alpha_n)?;
    Ok(c_n / (1.0 - c_n - alpha_n))
}

/// Limit of a true predictor's statistic, `(1 + delta) c_n / (1 - c_n - alpha_n)`.
pub fn true_limit(c_n: f64, alpha_n: f64, delta: f64) -> Result<f64> {
    if delta < 0.0 {
        return Err(Error::Domain(format!("delta must be >= 0, got {delta}")));
    }
    Ok((1.0 + delta) * spurious_limit(c_n, alpha_n)?)
}

/// Signal strength of predictor `j`:
/// `p^{-1} (x_j' Q_j x_j) (theta_j' Sigma^{-1} theta_j)`, where
/// `x_j' Q_j x_j` is obtained as `1 / g_jj` from the Gram inverse.
pub fn signal_strength(
    x: &DMatrix<f64>,
    theta_j: &DVector<f64>,
    sigma: &DMatrix<f64>,
    j: usize,
) -> Result<f64> {
    if j >= x.ncols() {
        return Err(Error::Dimension(format!(
            "column {j} out of range for k={}",
            x.ncols()
        )));
    }
    let p = theta_j.len();
    if sigma.nrows() != p || sigma.ncols() != p {
        return Err(Error::Dimension("sigma shape mismatch".to_string()));
    }
    let factor = GramFactor::compute(x)?;
    let g_jj = factor.inverse()[(j, j)];
    let positive = g_jj > 0.0;
    if !positive {
        return Err(Error::Rank("Gram inverse diagonal not positive".to_string()));
    }
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("sigma is not positive definite".to_string()))?;
    let quad = theta_j.dot(&chol.solve(theta_j));
    Ok(quad / g_jj / p as f64)
}

/// CLT covariance of `sqrt(p) (K_{j_1..j_q} - limit)` for spurious
/// predictors with direction matrix `dirs` (n x q, unit columns):
/// `c^2/(1-a-c)^2 [ 2(1-a)/(1-a-c) (D'D)^2 + tau (D o D)'(D o D) ]`.
pub fn clt_covariance(
    dirs: &DMatrix<f64>,
    c_n: f64,
    alpha_n: f64,
    tau: f64,
) -> Result<DMatrix<f64>> {
    check_ratios(c_n, alpha_n)?;
    for j in 0..dirs.ncols() {
        if (dirs.column(j).norm() - 1.0).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "direction column {j} is not unit norm"
            )));
        }
    }
    let m = dirs.tr_mul(dirs);
    let m2 = &m * &m;
    let had = dirs.map(|v| v * v);
    let hth = had.tr_mul(&had);
    let scale = c_n * c_n / ((1.0 - alpha_n - c_n) * (1.0 - alpha_n - c_n));
    let lead = 2.0 * (1.0 - alpha_n) / (1.0 - alpha_n - c_n);
    let mut g = (m2 * lead + hth * tau) * scale;
    let gt = g.transpose();
    g += gt;
    g.scale_mut(0.5);
    Ok(g)
}

/// Normal-case variance of `sqrt(p) (K_j - (1+delta) limit)` for a true
/// predictor: `2 c^2 [(1-a)(1+2 delta) + c delta^2] / (1-a-c)^3`.
pub fn clt_true_variance(c_n: f64, alpha_n: f64, delta: f64) -> Result<f64> {
    check_ratios(c_n, alpha_n)?;
    if delta < 0.0 {
        return Err(Error::Domain(format!("delta must be >= 0, got {delta}")));
    }
    let d = 1.0 - alpha_n - c_n;
    Ok(2.0 * c_n * c_n * ((1.0 - alpha_n) * (1.0 + 2.0 * delta) + c_n * delta * delta)
        / (d * d * d))
}

impl CltQuantities {
    pub fn compute(
        dirs: &DMatrix<f64>,
        dims: &Dimensions,
        tau: f64,
        delta: f64,
    ) -> Result<Self> {
        Ok(CltQuantities {
            delta,
            g_q: clt_covariance(dirs, dims.c_n, dims.alpha_n, tau)?,
            sigma_true_sq: clt_true_variance(dims.c_n, dims.alpha_n, delta)?,
        })
    }
}

/// One draw of the normal-theory distribution of a statistic:
/// a noncentral chi-square with `p` degrees of freedom over an independent
/// central chi-square with `m_tilde` degrees of freedom. Test oracle only.
///
/// `noncentrality` is the numerator's noncentrality parameter (pass
/// `p * delta_j` for a true predictor, 0 for a spurious one).
pub fn chisq_ratio_oracle_sample<R: Rng + ?Sized>(
    dims: &Dimensions,
    noncentrality: f64,
    rng: &mut R,
) -> f64 {
    let p = dims.p as f64;
    let m = dims.m_tilde as f64;
    // chi2(p; lambda) = chi2(p-1) + (Z + sqrt(lambda))^2, exact.
    let numerator = if noncentrality > 0.0 {
        let central = if dims.p > 1 {
            ChiSquared::new(p - 1.0).expect("df >= 1").sample(rng)
        } else {
            0.0
        };
        let z: f64 = rng.sample(StandardNormal);
        let shifted = z + noncentrality.sqrt();
        central + shifted * shifted
    } else {
        ChiSquared::new(p).expect("df >= 1").sample(rng)
    };
    let denominator = ChiSquared::new(m).expect("df >= 1").sample(rng);
    numerator / denominator
}
