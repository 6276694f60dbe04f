//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("entry ({row}, {col}) out of bounds for {nrows}x{ncols} matrix")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("conjugate gradient breakdown: curvature {0:.3e} is not positive")]
    CgBreakdown(f64),

    #[error("matrix pair is not regular (all sampled shifts singular)")]
    NotRegular,

    #[error("constraint matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("inconsistent constraint: {0}")]
    InconsistentConstraint(String),

    #[error("inconsistent state: {0}")]
    InconsistentState(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("fixed-point iteration did not converge within {max_iters} iterations (last update {last_update:.3e})")]
    PicardDiverged { max_iters: usize, last_update: f64 },

    #[error("matrix of size {size} exceeds the dense analysis cap of {cap} rows")]
    SizeCap { size: usize, cap: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn dim(context: impl Into<String>) -> Self {
        Error::DimensionMismatch(context.into())
    }
}
