//! Multiplier-bootstrap estimation of the selection threshold.
//!
//! Each replicate draws a synthetic error matrix from the matched law,
//! computes the knock-one-out statistics it induces, and records their
//! maximum over the candidate set; the threshold is an order statistic of
//! the recorded maxima.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dimensions, GramFactor};
use crate::dist::{ErrorDist, Standardized};
use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Significance level in [0, 1); 0 selects the largest maximum.
    pub nu: f64,
    /// Number of bootstrap replicates (N >= 1).
    pub n_reps: usize,
    pub seed: u64,
    /// Multiplier law for the synthetic error matrices.
    pub sampler: ErrorDist,
    /// Number of response columns of the synthetic error matrices.
    pub response_dim: usize,
    /// Thread count for this call; `None` inherits the ambient pool.
    pub workers: Option<usize>,
    /// Restrict the maximum to these candidate columns (default: all).
    pub candidates: Option<Vec<usize>>,
    /// Keep the per-replicate maxima in the returned estimate.
    pub retain_maxima: bool,
}

impl BootstrapConfig {
    pub fn new(nu: f64, n_reps: usize, seed: u64, sampler: ErrorDist, response_dim: usize) -> Self {
        BootstrapConfig {
            nu,
            n_reps,
            seed,
            sampler,
            response_dim,
            workers: None,
            candidates: None,
            retain_maxima: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.nu) {
            return Err(Error::Domain(format!(
                "nu must lie in [0, 1), got {}",
                self.nu
            )));
        }
        if self.n_reps == 0 {
            return Err(Error::Domain("n_reps must be at least 1".to_string()));
        }
        if self.response_dim == 0 {
            return Err(Error::Domain("response_dim must be at least 1".to_string()));
        }
        self.sampler.validate()
    }
}

/// A critical value with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub value: f64,
    /// Rule tag, e.g. "KBT".
    pub rule: String,
    pub nu: f64,
    pub n_reps: usize,
    pub seed: u64,
    pub sampler: ErrorDist,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap_maxima: Option<Vec<f64>>,
}

/// Empirical `(1 - nu)`-quantile of the maxima: the `ceil((1-nu) N)`-th
/// ascending order statistic, so `nu = 0` yields the maximum.
pub fn quantile_from_maxima(maxima: &[f64], nu: f64) -> Result<f64> {
    if maxima.is_empty() {
        return Err(Error::Domain("no bootstrap maxima".to_string()));
    }
    if !(0.0..1.0).contains(&nu) {
        return Err(Error::Domain(format!("nu must lie in [0, 1), got {nu}")));
    }
    let mut sorted = maxima.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("maxima are finite"));
    let n = sorted.len();
    let rank = ((1.0 - nu) * n as f64).ceil() as usize;
    let rank = rank.clamp(1, n);
    Ok(sorted[rank - 1])
}

/// Per-replicate maxima of the synthetic statistics, in replicate order.
/// Exposed so several quantiles can be extracted from one bootstrap run.
pub fn bootstrap_maxima(
    knockout_dirs: &DMatrix<f64>,
    x: &DMatrix<f64>,
    config: &BootstrapConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    let n = x.nrows();
    let k = x.ncols();
    if knockout_dirs.nrows() != n || knockout_dirs.ncols() != k {
        return Err(Error::Dimension(
            "knockout directions do not match the design".to_string(),
        ));
    }
    // Also guards p <= n - k - 1 so the synthetic residual Gram is invertible.
    Dimensions::new(n, config.response_dim, k)?;

    let dirs_cand = match &config.candidates {
        None => knockout_dirs.clone(),
        Some(idx) => {
            if idx.is_empty() {
                return Err(Error::Domain("candidate set is empty".to_string()));
            }
            if idx.iter().any(|&j| j >= k) {
                return Err(Error::Domain("candidate index out of range".to_string()));
            }
            let mut sub = DMatrix::zeros(n, idx.len());
            for (c, &j) in idx.iter().enumerate() {
                sub.set_column(c, &knockout_dirs.column(j));
            }
            sub
        }
    };

    let gram_inverse = GramFactor::compute(x)?.inverse();
    let sampler = config.sampler.sampler()?;

    let run = || -> Result<Vec<f64>> {
        (0..config.n_reps as u64)
            .into_par_iter()
            .map(|rep| {
                replicate_max(
                    &dirs_cand,
                    x,
                    &gram_inverse,
                    &sampler,
                    config,
                    rep,
                )
            })
            .collect()
    };

    match config.workers {
        None => run(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?
            .install(run),
    }
}

fn replicate_max(
    dirs_cand: &DMatrix<f64>,
    x: &DMatrix<f64>,
    gram_inverse: &DMatrix<f64>,
    sampler: &Standardized,
    config: &BootstrapConfig,
    rep: u64,
) -> Result<f64> {
    match replicate_max_once(dirs_cand, x, gram_inverse, sampler, config, rep) {
        Some(v) => Ok(v),
        // One retry with a fresh substream disjoint from the primary range.
        None => replicate_max_once(
            dirs_cand,
            x,
            gram_inverse,
            sampler,
            config,
            config.n_reps as u64 + rep,
        )
        .ok_or_else(|| {
            Error::Singular(format!(
                "synthetic residual Gram factorization failed twice in replicate {rep}"
            ))
        }),
    }
}

fn replicate_max_once(
    dirs_cand: &DMatrix<f64>,
    x: &DMatrix<f64>,
    gram_inverse: &DMatrix<f64>,
    sampler: &Standardized,
    config: &BootstrapConfig,
    stream: u64,
) -> Option<f64> {
    let n = x.nrows();
    let p = config.response_dim;
    let mut rng = substream(config.seed, stream);
    let e = DMatrix::from_fn(n, p, |_, _| sampler.sample(&mut rng));

    // E'QE = E'E - (E'X) G (X'E), never touching an n x n projector.
    let etx = e.tr_mul(x); // p x k
    let mut m = e.tr_mul(&e);
    if x.ncols() > 0 {
        let solved = gram_inverse * etx.transpose(); // k x p
        m -= &etx * solved;
    }
    let chol = m.cholesky()?;

    let t = e.tr_mul(dirs_cand); // p x q
    let solved = chol.solve(&t);
    let mut best = f64::NEG_INFINITY;
    for j in 0..t.ncols() {
        let v = t.column(j).dot(&solved.column(j));
        if v > best {
            best = v;
        }
    }
    Some(best)
}

/// Runs the multiplier bootstrap and extracts the threshold at the
/// configured significance level.
pub fn bootstrap_threshold(
    knockout_dirs: &DMatrix<f64>,
    x: &DMatrix<f64>,
    config: &BootstrapConfig,
) -> Result<ThresholdEstimate> {
    let maxima = bootstrap_maxima(knockout_dirs, x, config)?;
    let value = quantile_from_maxima(&maxima, config.nu)?;
    Ok(ThresholdEstimate {
        value,
        rule: "KBT".to_string(),
        nu: config.nu,
        n_reps: config.n_reps,
        seed: config.seed,
        sampler: config.sampler,
        bootstrap_maxima: config.retain_maxima.then_some(maxima),
    })
}
