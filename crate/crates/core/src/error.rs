use thiserror::Error;

/// Errors produced anywhere in the prolongation pipeline and the AMR harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("least-squares matrix is rank deficient (column {column}, |R_jj| = {diag:e})")]
    RankDeficient { column: usize, diag: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported spatial dimension {0} (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("kernel factor lost precision: bracket evaluated to {0:e}")]
    KernelCancellation(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("proper nesting violated: {0}")]
    NestingViolation(String),

    #[error("CFL number {cfl:.4} exceeds the limit {limit}")]
    CflViolation { cfl: f64, limit: f64 },

    #[error("composite layouts differ: {0}")]
    LayoutMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
