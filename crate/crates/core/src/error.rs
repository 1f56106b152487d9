//! Error type shared across the crate.

/// Everything that can go wrong when building systems or evaluating bounds.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("necessary density condition violated: a*b = {ab} > 1")]
    DensityViolated { ab: f64 },

    #[error("painless regime violated: need a <= c <= 1/b, got a = {a}, c = {c}, 1/b = {inv_b}")]
    PainlessRegime { a: f64, c: f64, inv_b: f64 },

    #[error("not a frame (covering fails): essential infimum of the window periodization is 0")]
    CoveringFails,

    #[error("operation requires a compactly supported window")]
    UnboundedSupport,

    #[error("window derivative is not essentially bounded (jump discontinuity)")]
    DistributionalDerivative,

    #[error("series tail does not converge within the truncation budget")]
    TailDivergence,

    #[error("quadrature refinement did not converge: relative change {change:.3e}")]
    QuadratureNotConverged { change: f64 },

    #[error("atom (n = {n}, k = {k}) does not fit inside the grid")]
    SupportOverflow { n: i64, k: i64 },

    #[error("grid step {dx:.3e} too coarse to resolve the window (need <= {needed:.3e})")]
    GridTooCoarse { dx: f64, needed: f64 },

    #[error("functions live on different grids")]
    GridMismatch,

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("jitter pattern extends to all frequency rows; column sums are not finite")]
    NonSummableColumns,

    #[error("power iteration did not converge: residual {residual:.3e} after {iters} iterations")]
    NoConvergence { residual: f64, iters: usize },

    #[error("malformed input file: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
