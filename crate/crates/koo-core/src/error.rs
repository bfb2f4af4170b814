use thiserror::Error;

/// Errors produced by dataset validation and the numerical kernels.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Matrix shapes are incompatible or violate `n > p + k`.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// `X'X` is not positive definite (rank-deficient design).
    #[error("rank error: {0}")]
    Rank(String),

    /// Input values are unusable (non-finite entries, missing cells).
    #[error("data error: {0}")]
    Data(String),

    /// A factorization of an observed covariance-type matrix failed.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// A parameter is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
