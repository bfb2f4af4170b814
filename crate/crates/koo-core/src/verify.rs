//! Empirical verification of the asymptotic theory: almost-sure limits,
//! fluctuation variances, the kurtosis estimator and the
//! distribution-robustness experiment.
//!
//! Each check produces records with the observed statistic, its theoretical
//! target and the pinned tolerance. Checks whose assumptions are not met by
//! the requested error law (infinite fourth moment, nonzero third moment)
//! are reported informationally with `pass = None`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::residual_gram_with;
use crate::dataset::{DesignCache, Dimensions};
use crate::dist::ErrorDist;
use crate::error::{Error, Result};
use crate::koo::{clt_covariance, clt_true_variance, quadform_stats};
use crate::kurtosis::{projector_diag, residual_gram_diag, tau_from_parts};
use crate::rng::{child_seed, substream};

/// |mean_j K_j - limit| tolerance for the null-limit check.
pub const LIMIT_MEAN_TOL: f64 = 0.01;
/// max_j |K_j - limit| tolerance for the null-limit check.
pub const LIMIT_MAX_TOL: f64 = 0.1;
/// |K_j - (1+delta) limit| tolerance for a planted predictor.
pub const PLANTED_TOL: f64 = 0.05;
/// Relative tolerance on the spurious fluctuation variance.
pub const CLT_SPURIOUS_VAR_RTOL: f64 = 0.10;
/// Absolute tolerance on off-diagonal correlations.
pub const CLT_CORR_TOL: f64 = 0.10;
/// Relative tolerance on the true-predictor fluctuation variance.
pub const CLT_TRUE_VAR_RTOL: f64 = 0.15;
/// The kurtosis-estimator mean must sit within this many standard errors.
pub const TAU_SE_MULTIPLE: f64 = 3.0;

const DESIGN_TAG: u64 = u64::MAX;

#[derive(Debug, Clone, Serialize)]
pub struct VerificationRecord {
    /// What was measured, e.g. "null-limit-max-deviation".
    pub check: String,
    /// Dimensions, law and seed that produced the record.
    pub params: String,
    pub observed: f64,
    pub target: f64,
    pub tolerance: f64,
    /// `None` marks informational records.
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub records: Vec<VerificationRecord>,
}

impl VerificationReport {
    /// True when every asserted (non-informational) record passed.
    pub fn all_passed(&self) -> bool {
        self.records.iter().all(|r| r.pass != Some(false))
    }
}

fn uniform_design(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    use rand::Rng;
    let mut rng = substream(child_seed(seed, DESIGN_TAG), 0);
    DMatrix::from_fn(n, k, |_, _| rng.random::<f64>() * 4.0 + 1.0)
}

fn round_dims(n: usize, c: f64, alpha: f64) -> Result<Dimensions> {
    let p = (c * n as f64).round() as usize;
    let k = (alpha * n as f64).round() as usize;
    Dimensions::new(n, p, k)
}

/// Coefficient vector for a planted predictor hitting the requested signal
/// strength exactly: `||theta||^2 = delta * p * g_jj` with identity error
/// covariance.
fn planted_theta(delta: f64, p: usize, g_jj: f64) -> DVector<f64> {
    let mut theta = DVector::zeros(p);
    theta[0] = (delta * p as f64 * g_jj).sqrt();
    theta
}

/// Checks the almost-sure limit of the statistics under a null model on a
/// random design, optionally also planting one predictor with known signal
/// strength.
pub fn verify_limits(
    n: usize,
    c: f64,
    alpha: f64,
    law: ErrorDist,
    draws: usize,
    planted_delta: Option<f64>,
    seed: u64,
) -> Result<VerificationReport> {
    let dims = round_dims(n, c, alpha)?;
    law.validate()?;
    if draws == 0 {
        return Err(Error::Domain("draws must be at least 1".to_string()));
    }
    let limit = dims.spurious_limit();
    let assertable = law.excess_kurtosis().is_some();
    let params = format!(
        "n={n} p={} k={} law={} draws={draws} seed={seed}",
        dims.p,
        dims.k,
        law.label()
    );

    let mut worst_mean_dev: f64 = 0.0;
    let mut worst_max_dev: f64 = 0.0;
    let mut worst_mean_abs: f64 = 0.0;
    let mut worst_planted_dev: f64 = 0.0;
    for draw in 0..draws as u64 {
        let x = uniform_design(dims.n, dims.k, seed.wrapping_add(draw));
        let design = DesignCache::compute(&x)?;
        let e = law.fill(dims.n, dims.p, &mut substream(seed, draw))?;

        let w = residual_gram_with(&e, &x, &design.gram_inverse)?;
        let b = e.tr_mul(&design.knockout_dirs);
        let kappa = quadform_stats(&b, &w)?;
        let mean = kappa.iter().sum::<f64>() / kappa.len() as f64;
        let max_dev = kappa.iter().map(|k| (k - limit).abs()).fold(0.0, f64::max);
        let mean_abs = kappa.iter().map(|k| (k - limit).abs()).sum::<f64>() / kappa.len() as f64;
        worst_mean_dev = worst_mean_dev.max((mean - limit).abs());
        worst_max_dev = worst_max_dev.max(max_dev);
        worst_mean_abs = worst_mean_abs.max(mean_abs);

        if let Some(delta) = planted_delta {
            if delta < 0.0 {
                return Err(Error::Domain("planted delta must be >= 0".to_string()));
            }
            let theta = planted_theta(delta, dims.p, design.gram_inverse[(0, 0)]);
            let y = &e + x.column(0) * theta.transpose();
            let w = residual_gram_with(&y, &x, &design.gram_inverse)?;
            let b = y.tr_mul(&design.knockout_dirs.columns(0, 1).clone_owned());
            let k0 = quadform_stats(&b, &w)?[0];
            worst_planted_dev = worst_planted_dev.max((k0 - dims.true_limit(delta)).abs());
        }
    }

    let mut records = vec![
        VerificationRecord {
            check: "null-limit-mean-deviation".to_string(),
            params: params.clone(),
            observed: worst_mean_dev,
            target: 0.0,
            tolerance: LIMIT_MEAN_TOL,
            pass: assertable.then_some(worst_mean_dev < LIMIT_MEAN_TOL),
            note: Some(format!("cross-sectional mean of K_j vs limit {limit:.6}")),
        },
        VerificationRecord {
            check: "null-limit-max-deviation".to_string(),
            params: params.clone(),
            observed: worst_max_dev,
            target: 0.0,
            tolerance: LIMIT_MAX_TOL,
            pass: assertable.then_some(worst_max_dev < LIMIT_MAX_TOL),
            note: None,
        },
        VerificationRecord {
            check: "null-limit-mean-absolute-deviation".to_string(),
            params: params.clone(),
            observed: worst_mean_abs,
            target: 0.0,
            tolerance: f64::NAN,
            pass: None,
            note: Some("informational: scales like sqrt(G_1/p)".to_string()),
        },
    ];
    if let Some(delta) = planted_delta {
        records.push(VerificationRecord {
            check: "planted-limit-deviation".to_string(),
            params: params.clone(),
            observed: worst_planted_dev,
            target: 0.0,
            tolerance: PLANTED_TOL,
            pass: assertable.then_some(worst_planted_dev < PLANTED_TOL),
            note: Some(format!("planted signal strength delta={delta}")),
        });
    }
    Ok(VerificationReport { records })
}

fn sample_covariance(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let reps = rows.len();
    let q = rows[0].len();
    let mut mean = vec![0.0; q];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= reps as f64;
    }
    let mut cov = DMatrix::zeros(q, q);
    for row in rows {
        for i in 0..q {
            for j in 0..q {
                cov[(i, j)] += (row[i] - mean[i]) * (row[j] - mean[j]);
            }
        }
    }
    cov / (reps as f64 - 1.0)
}

/// Compares the empirical covariance of `sqrt(p)(K - limit)` over spurious
/// predictors against the fluctuation formula.
pub fn verify_clt_spurious(
    n: usize,
    c: f64,
    alpha: f64,
    q: usize,
    law: ErrorDist,
    reps: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let dims = round_dims(n, c, alpha)?;
    law.validate()?;
    if q == 0 || q > dims.k {
        return Err(Error::Domain(format!("need 1 <= q <= k, got q={q}")));
    }
    if reps < 2 {
        return Err(Error::Domain("need at least 2 replicates".to_string()));
    }
    let x = uniform_design(dims.n, dims.k, seed);
    let design = DesignCache::compute(&x)?;
    let dirs_q = design.knockout_dirs.columns(0, q).clone_owned();
    let tau = law.excess_kurtosis();
    let g_theory = clt_covariance(&dirs_q, dims.c_n, dims.alpha_n, tau.unwrap_or(0.0))?;
    let limit = dims.spurious_limit();
    let sqrt_p = (dims.p as f64).sqrt();

    let devs: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let e = law.fill(dims.n, dims.p, &mut substream(seed, rep))?;
            let w = residual_gram_with(&e, &x, &design.gram_inverse)?;
            let b = e.tr_mul(&dirs_q);
            let kappa = quadform_stats(&b, &w)?;
            Ok(kappa.iter().map(|k| sqrt_p * (k - limit)).collect())
        })
        .collect::<Result<_>>()?;
    let cov = sample_covariance(&devs);

    let assertable = tau.is_some();
    let params = format!(
        "n={n} p={} k={} q={q} law={} reps={reps} seed={seed}",
        dims.p,
        dims.k,
        law.label()
    );
    let mut records = Vec::new();
    for i in 0..q {
        let observed = cov[(i, i)];
        let target = g_theory[(i, i)];
        let rel = (observed - target).abs() / target;
        records.push(VerificationRecord {
            check: format!("clt-spurious-variance[{i}]"),
            params: params.clone(),
            observed,
            target,
            tolerance: CLT_SPURIOUS_VAR_RTOL,
            pass: assertable.then_some(rel <= CLT_SPURIOUS_VAR_RTOL),
            note: Some("relative tolerance".to_string()),
        });
    }
    if q >= 2 {
        let mut worst = 0.0f64;
        for i in 0..q {
            for j in (i + 1)..q {
                let emp = cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt();
                let theo = g_theory[(i, j)] / (g_theory[(i, i)] * g_theory[(j, j)]).sqrt();
                worst = worst.max((emp - theo).abs());
            }
        }
        records.push(VerificationRecord {
            check: "clt-spurious-offdiag-corr".to_string(),
            params: params.clone(),
            observed: worst,
            target: 0.0,
            tolerance: CLT_CORR_TOL,
            pass: assertable.then_some(worst <= CLT_CORR_TOL),
            note: Some("max |empirical - theoretical| correlation".to_string()),
        });
        let frob = (&cov - &g_theory).norm() / g_theory.norm();
        records.push(VerificationRecord {
            check: "clt-spurious-frobenius-rel".to_string(),
            params,
            observed: frob,
            target: 0.0,
            tolerance: f64::NAN,
            pass: None,
            note: None,
        });
    }
    Ok(VerificationReport { records })
}

/// Compares the empirical fluctuation variance of one planted predictor
/// against the true-variable variance formula. The alternate noncentrality
/// convention (delta squared in place of delta) is reported alongside,
/// informationally.
pub fn verify_clt_true(
    n: usize,
    c: f64,
    alpha: f64,
    delta: f64,
    law: ErrorDist,
    reps: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let dims = round_dims(n, c, alpha)?;
    law.validate()?;
    if delta < 0.0 {
        return Err(Error::Domain("delta must be >= 0".to_string()));
    }
    if reps < 2 {
        return Err(Error::Domain("need at least 2 replicates".to_string()));
    }
    let x = uniform_design(dims.n, dims.k, seed);
    let design = DesignCache::compute(&x)?;
    let theta = planted_theta(delta, dims.p, design.gram_inverse[(0, 0)]);
    let dirs_0 = design.knockout_dirs.columns(0, 1).clone_owned();
    let sqrt_p = (dims.p as f64).sqrt();
    let center = dims.true_limit(delta);

    let devs: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let e = law.fill(dims.n, dims.p, &mut substream(seed, rep))?;
            let y = &e + x.column(0) * theta.transpose();
            let w = residual_gram_with(&y, &x, &design.gram_inverse)?;
            let b = y.tr_mul(&dirs_0);
            Ok(sqrt_p * (quadform_stats(&b, &w)?[0] - center))
        })
        .collect::<Result<_>>()?;
    let mean = devs.iter().sum::<f64>() / reps as f64;
    let var = devs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (reps as f64 - 1.0);

    let target = clt_true_variance(dims.c_n, dims.alpha_n, delta)?;
    let rel = (var - target).abs() / target;
    // Checks require a finite fourth moment and zero third moment.
    let assertable = law.excess_kurtosis().is_some() && law.is_symmetric();
    let params = format!(
        "n={n} p={} k={} delta={delta} law={} reps={reps} seed={seed}",
        dims.p,
        dims.k,
        law.label()
    );
    let alt_target = clt_true_variance(dims.c_n, dims.alpha_n, delta * delta)?;
    let alt_center_offset = mean + sqrt_p * (center - dims.true_limit(delta * delta));
    let records = vec![
        VerificationRecord {
            check: "clt-true-variance".to_string(),
            params: params.clone(),
            observed: var,
            target,
            tolerance: CLT_TRUE_VAR_RTOL,
            pass: assertable.then_some(rel <= CLT_TRUE_VAR_RTOL),
            note: (!assertable).then(|| "law violates a moment assumption; informational".to_string()),
        },
        VerificationRecord {
            check: "clt-true-center-offset".to_string(),
            params: params.clone(),
            observed: mean,
            target: 0.0,
            tolerance: f64::NAN,
            pass: None,
            note: Some("mean of sqrt(p)(K - (1+delta) limit); 0 supports this centering".to_string()),
        },
        VerificationRecord {
            check: "clt-true-variance-delta-squared-variant".to_string(),
            params,
            observed: var,
            target: alt_target,
            tolerance: f64::NAN,
            pass: None,
            note: Some(format!(
                "alternate noncentrality convention (delta^2); its centering is off by {alt_center_offset:.4} on the sqrt(p) scale"
            )),
        },
    ];
    Ok(VerificationReport { records })
}

/// Monte Carlo check that the excess-kurtosis estimator is unbiased.
pub fn verify_tau(
    law: ErrorDist,
    n: usize,
    p: usize,
    k: usize,
    reps: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let dims = Dimensions::new(n, p, k)?;
    law.validate()?;
    if reps < 2 {
        return Err(Error::Domain("need at least 2 replicates".to_string()));
    }
    let x = uniform_design(n, k, seed);
    let design = DesignCache::compute(&x)?;
    let q_diag = projector_diag(&x, &design.gram_inverse);
    let tr_qq: f64 = q_diag.iter().map(|v| v * v).sum();

    let taus: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let e = law.fill(n, p, &mut substream(seed, rep))?;
            let w_diag = residual_gram_diag(&e, &x, &design.gram_inverse);
            Ok(tau_from_parts(&w_diag, tr_qq, &dims)?.raw_value)
        })
        .collect::<Result<_>>()?;
    let mean = taus.iter().sum::<f64>() / reps as f64;
    let sd = (taus.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (reps as f64 - 1.0))
        .sqrt();
    let se = sd / (reps as f64).sqrt();

    let params = format!("n={n} p={p} k={k} law={} reps={reps} seed={seed}", law.label());
    let (target, pass, note) = match law.excess_kurtosis() {
        Some(tau) => (
            tau,
            Some((mean - tau).abs() < TAU_SE_MULTIPLE * se),
            None,
        ),
        None => (
            f64::NAN,
            None,
            Some("law has no finite fourth moment; empirical mean reported".to_string()),
        ),
    };
    Ok(VerificationReport {
        records: vec![
            VerificationRecord {
                check: "tau-estimator-mean".to_string(),
                params: params.clone(),
                observed: mean,
                target,
                tolerance: TAU_SE_MULTIPLE * se,
                pass,
                note,
            },
            VerificationRecord {
                check: "tau-estimator-sd".to_string(),
                params,
                observed: sd,
                target: f64::NAN,
                tolerance: f64::NAN,
                pass: None,
                note: None,
            },
        ],
    })
}

/// Design families for the distribution-robustness experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Figure1Design {
    /// Entries i.i.d. uniform on (1, 5).
    RandomUniform,
    /// `(I_k, O)'`.
    RectDiagonal,
}

/// Quartile summary of the spurious statistics under one error law.
#[derive(Debug, Clone, Serialize)]
pub struct LawSummary {
    pub law: String,
    pub excess_kurtosis: Option<f64>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub count: usize,
}

fn percentile(sorted: &[f64], f: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * f;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Null-model spurious statistics under several error laws on one design,
/// summarized by quartiles (plot-ready).
pub fn figure1_experiment(
    design: Figure1Design,
    n: usize,
    k: usize,
    p: usize,
    laws: &[ErrorDist],
    reps: usize,
    seed: u64,
) -> Result<Vec<LawSummary>> {
    let dims = Dimensions::new(n, p, k)?;
    if laws.is_empty() {
        return Err(Error::Domain("need at least one law".to_string()));
    }
    if reps == 0 {
        return Err(Error::Domain("reps must be at least 1".to_string()));
    }
    let x = match design {
        Figure1Design::RandomUniform => uniform_design(n, k, seed),
        Figure1Design::RectDiagonal => DMatrix::identity(n, k),
    };
    let cache = DesignCache::compute(&x)?;

    laws.iter()
        .enumerate()
        .map(|(li, law)| {
            law.validate()?;
            let mut stats = Vec::with_capacity(reps * dims.k);
            for rep in 0..reps as u64 {
                let stream = li as u64 * reps as u64 + rep;
                let e = law.fill(n, p, &mut substream(seed, stream))?;
                let w = residual_gram_with(&e, &x, &cache.gram_inverse)?;
                let b = e.tr_mul(&cache.knockout_dirs);
                stats.extend(quadform_stats(&b, &w)?);
            }
            stats.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
            Ok(LawSummary {
                law: law.label(),
                excess_kurtosis: law.excess_kurtosis(),
                median: percentile(&stats, 0.5),
                q1: percentile(&stats, 0.25),
                q3: percentile(&stats, 0.75),
                count: stats.len(),
            })
        })
        .collect()
}

/// Convenience wrapper: full verification pass over one configuration.
pub fn verify_all(
    n: usize,
    c: f64,
    alpha: f64,
    law: ErrorDist,
    reps: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let mut records = Vec::new();
    records.extend(verify_limits(n, c, alpha, law, 1, Some(1.0), seed)?.records);
    records.extend(verify_clt_spurious(n, c, alpha, 2, law, reps, seed)?.records);
    records.extend(verify_clt_true(n, c, alpha, 0.5, law, reps, seed)?.records);
    let dims = round_dims(n, c, alpha)?;
    records.extend(verify_tau(law, n, dims.p, dims.k, reps.min(500), seed)?.records);
    Ok(VerificationReport { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::koo::signal_strength;

    #[test]
    fn planted_theta_hits_requested_delta() {
        let x = uniform_design(60, 8, 7);
        let design = DesignCache::compute(&x).unwrap();
        let delta = 1.7;
        let theta = planted_theta(delta, 12, design.gram_inverse[(0, 0)]);
        let sigma = DMatrix::identity(12, 12);
        let got = signal_strength(&x, &theta, &sigma, 0).unwrap();
        assert!((got - delta).abs() < 1e-10, "{got} vs {delta}");
    }

    #[test]
    fn percentile_interpolation() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 4.0);
        assert_eq!(percentile(&v, 0.5), 2.5);
    }

    #[test]
    fn limits_small_scale_smoke() {
        // Small n: only shape and determinism, not the tolerances.
        let report =
            verify_limits(120, 0.2, 0.2, ErrorDist::StandardNormal, 2, Some(1.0), 3).unwrap();
        assert_eq!(report.records.len(), 4);
        let again =
            verify_limits(120, 0.2, 0.2, ErrorDist::StandardNormal, 2, Some(1.0), 3).unwrap();
        assert_eq!(report.records[0].observed, again.records[0].observed);
    }

    #[test]
    fn t3_reports_are_informational() {
        let report = verify_limits(
            100,
            0.2,
            0.2,
            ErrorDist::StandardizedT { df: 3.0 },
            1,
            None,
            4,
        )
        .unwrap();
        assert!(report.records.iter().all(|r| r.pass.is_none()));
        assert!(report.all_passed());
    }

    #[test]
    fn skewed_law_makes_true_variance_informational() {
        let report = verify_clt_true(
            150,
            0.2,
            0.2,
            0.5,
            ErrorDist::StandardizedExponential,
            20,
            5,
        )
        .unwrap();
        assert!(report.records[0].pass.is_none());
    }

    #[test]
    fn sample_covariance_of_known_rows() {
        let rows = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 2.0], vec![0.0, -2.0]];
        let cov = sample_covariance(&rows);
        assert!((cov[(0, 0)] - 2.0 / 3.0).abs() < 1e-12);
        assert!((cov[(1, 1)] - 8.0 / 3.0).abs() < 1e-12);
    }
}
