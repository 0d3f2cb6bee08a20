use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("valence mismatch: expected {expected}, got {got}")]
    ValenceMismatch { expected: String, got: String },

    #[error("tensor rank {0} exceeds the supported maximum of 4")]
    ValenceOverflow(usize),

    #[error("density is not strictly positive (min {min:e})")]
    NonPositiveDensity { min: f64 },

    #[error("band limit {max_freq} exceeds N/4 = {limit}")]
    BandLimitTooLarge { max_freq: usize, limit: usize },

    #[error("amplitude must be non-negative and finite, got {0}")]
    InvalidAmplitude(f64),

    #[error("metric is not positive definite at point {point} (eigenvalues {min_eig:e}..{max_eig:e})")]
    NotPositiveDefinite { point: usize, min_eig: f64, max_eig: f64 },

    #[error("section is not contraction-free (max |con| = {0:e})")]
    NotTraceFree(f64),

    #[error("unsupported dimension {dim}: {reason}")]
    UnsupportedDimension { dim: usize, reason: &'static str },

    #[error("metric is not conformally flat in the chart (deviation {0:e})")]
    NotConformallyFlat(f64),

    #[error("cubic differential is not holomorphic (Cauchy-Riemann residual {0:e})")]
    NotHolomorphic(f64),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { solver: &'static str, iterations: usize, residual: f64 },

    #[error("perturbed metric g + t h is not positive definite at step t = {0:e}")]
    ProbeNotPositiveDefinite(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed field container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
