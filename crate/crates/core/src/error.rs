use thiserror::Error;

/// Errors surfaced by grid construction, norms, solvers and reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid size {0} is not a power of two >= 8")]
    BadGridSize(usize),

    #[error("fields live on different grids ({0} vs {1} points)")]
    GridMismatch(usize, usize),

    #[error("coefficients are not Hermitian-symmetric (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("transport velocity is not divergence-free (residual {residual:.3e} vs allowed {allowed:.3e})")]
    NonSolenoidal { residual: f64, allowed: f64 },

    #[error("time series is empty")]
    EmptySeries,

    #[error("denominator of a measured ratio is zero; the ratio is undefined")]
    ZeroDenominator,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),

    #[error("blow-up at t = {time:.6e}{}", iterate.map(|n| format!(" in iterate {n}")).unwrap_or_default())]
    BlowUp { time: f64, iterate: Option<usize> },
}

pub type Result<T> = std::result::Result<T, Error>;
