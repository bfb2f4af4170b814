//! Dimension-checked containers for `(Y, X)` and the projection algebra
//! behind the knock-one-out statistics.
//!
//! The full-model residual projector `Q = I - X(X'X)^{-1}X'` is never
//! materialized; everything is rewritten through the Gram inverse
//! `G = (X'X)^{-1}` and residuals, so memory stays `O(nk + np)` even when
//! `n` is large.

use nalgebra::{DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reciprocal-condition estimate below which a Gram factorization is treated
/// as rank deficient.
const GRAM_RCOND_MIN: f64 = 1e-12;

/// Problem sizes and the derived ratios the asymptotic formulas run on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    /// p / n
    pub c_n: f64,
    /// k / n
    pub alpha_n: f64,
    /// n - k - p + 1, degrees of freedom of the normal-case denominator
    pub m_tilde: usize,
}

impl Dimensions {
    pub fn new(n: usize, p: usize, k: usize) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::Dimension(format!(
                "need n >= 1 and p >= 1, got n={n}, p={p}"
            )));
        }
        if n <= p + k {
            return Err(Error::Dimension(format!(
                "need n > p + k, got n={n}, p={p}, k={k}"
            )));
        }
        let c_n = p as f64 / n as f64;
        let alpha_n = k as f64 / n as f64;
        // n > p + k makes c_n in (0,1), alpha_n in [0,1), c_n + alpha_n < 1
        // and m_tilde >= 2 automatically.
        Ok(Dimensions {
            n,
            p,
            k,
            c_n,
            alpha_n,
            m_tilde: n - k - p + 1,
        })
    }

    /// Limit of the statistics of predictors with zero coefficient rows:
    /// `c_n / (1 - c_n - alpha_n)`.
    pub fn spurious_limit(&self) -> f64 {
        self.c_n / (1.0 - self.c_n - self.alpha_n)
    }

    /// Limit for a predictor with signal strength `delta`:
    /// `(1 + delta) * spurious_limit`.
    pub fn true_limit(&self, delta: f64) -> f64 {
        (1.0 + delta) * self.spurious_limit()
    }
}

/// Observed responses and predictors with validated shapes.
#[derive(Debug, Clone)]
pub struct RegressionDataset {
    y: DMatrix<f64>,
    x: DMatrix<f64>,
    dims: Dimensions,
}

impl RegressionDataset {
    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    /// Builds a dataset over a design whose Gram factorization has already
    /// been validated, skipping the positive-definiteness probe. Intended
    /// for repeated draws of `Y` over a fixed `X`.
    pub fn with_design(y: DMatrix<f64>, x: DMatrix<f64>, design: &DesignCache) -> Result<Self> {
        if design.knockout_dirs.nrows() != x.nrows() || design.knockout_dirs.ncols() != x.ncols() {
            return Err(Error::Dimension(
                "design cache does not match the predictor matrix".to_string(),
            ));
        }
        check_shapes_and_finiteness(&y, &x)?;
        let dims = Dimensions::new(y.nrows(), y.ncols(), x.ncols())?;
        Ok(RegressionDataset { y, x, dims })
    }

    /// Full-model coefficient estimate `(X'X)^{-1} X'Y`.
    pub fn least_squares_coeffs(&self, design: &DesignCache) -> DMatrix<f64> {
        let xty = self.x.tr_mul(&self.y);
        &design.gram_inverse * xty
    }
}

fn check_shapes_and_finiteness(y: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<()> {
    if y.nrows() != x.nrows() {
        return Err(Error::Dimension(format!(
            "Y has {} rows but X has {}",
            y.nrows(),
            x.nrows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("Y contains non-finite entries".to_string()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("X contains non-finite entries".to_string()));
    }
    Ok(())
}

/// Validates `(Y, X)`: shared row count, finite entries, `n > p + k` and a
/// positive-definite `X'X`.
pub fn build_dataset(y: DMatrix<f64>, x: DMatrix<f64>) -> Result<RegressionDataset> {
    check_shapes_and_finiteness(&y, &x)?;
    let dims = Dimensions::new(y.nrows(), y.ncols(), x.ncols())?;
    GramFactor::compute(&x)?;
    Ok(RegressionDataset { y, x, dims })
}

/// Factorization of `X'X`, with a column-pivoted QR of `X` as fallback when
/// the Cholesky route fails or looks too ill-conditioned.
pub(crate) enum GramFactor {
    Empty,
    Chol(nalgebra::Cholesky<f64, Dyn>),
    Qr {
        r_inv: DMatrix<f64>,
        perm: DMatrix<f64>,
    },
}

impl GramFactor {
    pub(crate) fn compute(x: &DMatrix<f64>) -> Result<Self> {
        Self::compute_with_mode(x, false)
    }

    pub(crate) fn compute_with_mode(x: &DMatrix<f64>, force_qr: bool) -> Result<Self> {
        let k = x.ncols();
        if k == 0 {
            return Ok(GramFactor::Empty);
        }
        if !force_qr {
            let gram = x.tr_mul(x);
            if let Some(chol) = gram.cholesky() {
                let diag = chol.l_dirty().diagonal();
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for d in diag.iter() {
                    lo = lo.min(*d);
                    hi = hi.max(*d);
                }
                let rcond = if hi > 0.0 { (lo / hi) * (lo / hi) } else { 0.0 };
                if rcond >= GRAM_RCOND_MIN {
                    return Ok(GramFactor::Chol(chol));
                }
            }
        }
        // QR of X measures the conditioning without squaring it.
        let qr = x.clone().col_piv_qr();
        let r = qr.r();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..k {
            let d = r[(i, i)].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if hi == 0.0 || (lo / hi) * (lo / hi) < GRAM_RCOND_MIN {
            return Err(Error::Rank(
                "X'X is not positive definite (rank-deficient design)".to_string(),
            ));
        }
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .ok_or_else(|| Error::Rank("triangular factor is singular".to_string()))?;
        let mut perm = DMatrix::identity(k, k);
        qr.p().permute_columns(&mut perm);
        Ok(GramFactor::Qr { r_inv, perm })
    }

    /// `(X'X)^{-1}` as a dense k x k matrix.
    pub(crate) fn inverse(&self) -> DMatrix<f64> {
        match self {
            GramFactor::Empty => DMatrix::zeros(0, 0),
            GramFactor::Chol(chol) => chol.inverse(),
            // X P = Q R  =>  (X'X)^{-1} = P R^{-1} R^{-T} P'
            GramFactor::Qr { r_inv, perm } => {
                let m = r_inv * r_inv.transpose();
                perm * m * perm.transpose()
            }
        }
    }
}

/// Design-side quantities reusable across response draws over a fixed `X`.
#[derive(Debug, Clone)]
pub struct DesignCache {
    /// `(X'X)^{-1}`
    pub gram_inverse: DMatrix<f64>,
    /// Unit knock-one-out directions, one column per predictor.
    pub knockout_dirs: DMatrix<f64>,
}

impl DesignCache {
    pub fn compute(x: &DMatrix<f64>) -> Result<Self> {
        let factor = GramFactor::compute(x)?;
        let gram_inverse = factor.inverse();
        let knockout_dirs = dirs_from_gram(x, &gram_inverse)?;
        Ok(DesignCache {
            gram_inverse,
            knockout_dirs,
        })
    }
}

fn dirs_from_gram(x: &DMatrix<f64>, gram_inverse: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = x.ncols();
    if k == 0 {
        return Ok(DMatrix::zeros(x.nrows(), 0));
    }
    // a_j = X G u_j / sqrt(g_jj): one matrix product for all j.
    let mut dirs = x * gram_inverse;
    for j in 0..k {
        let g_jj = gram_inverse[(j, j)];
        let positive = g_jj > 0.0;
        if !positive {
            return Err(Error::Rank(format!(
                "Gram inverse has non-positive diagonal at column {j}"
            )));
        }
        let scale = 1.0 / g_jj.sqrt();
        dirs.column_mut(j).scale_mut(scale);
    }
    Ok(dirs)
}

/// Unit directions `a_j`: the normalized residual of column `x_j` on the
/// remaining columns, computed for all `j` in one shot through the Gram
/// inverse.
pub fn knockout_directions(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let factor = GramFactor::compute(x)?;
    dirs_from_gram(x, &factor.inverse())
}

/// Residual Gram matrix `W = Y'QY`, computed through residuals
/// `R = Y - X (G (X'Y))` as `R'R`.
pub fn residual_gram(ds: &RegressionDataset) -> Result<DMatrix<f64>> {
    let factor = GramFactor::compute(ds.x())?;
    residual_gram_with(ds.y(), ds.x(), &factor.inverse())
}

pub(crate) fn residual_gram_with(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    gram_inverse: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let mut w = if x.ncols() == 0 {
        y.tr_mul(y)
    } else {
        let coeffs = gram_inverse * x.tr_mul(y);
        let resid = y - x * coeffs;
        resid.tr_mul(&resid)
    };
    // Clean up round-off asymmetry.
    let wt = w.transpose();
    w += wt;
    w.scale_mut(0.5);
    Ok(w)
}

/// Per-dataset projection quantities: Gram inverse, knock-one-out directions
/// and the residual Gram matrix.
#[derive(Debug, Clone)]
pub struct ProjectionCache {
    pub gram_inverse: DMatrix<f64>,
    pub knockout_dirs: DMatrix<f64>,
    pub residual_gram: DMatrix<f64>,
}

impl ProjectionCache {
    pub fn compute(ds: &RegressionDataset) -> Result<Self> {
        let design = DesignCache::compute(ds.x())?;
        Self::with_design(ds, &design)
    }

    pub fn with_design(ds: &RegressionDataset, design: &DesignCache) -> Result<Self> {
        let residual_gram = residual_gram_with(ds.y(), ds.x(), &design.gram_inverse)?;
        Ok(ProjectionCache {
            gram_inverse: design.gram_inverse.clone(),
            knockout_dirs: design.knockout_dirs.clone(),
            residual_gram,
        })
    }
}
