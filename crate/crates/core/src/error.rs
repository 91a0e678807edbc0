//! Error type shared across the crate.
//!
//! Variants map onto the process exit codes used by the CLI: configuration
//! problems exit with 1, numerical failures (including Riccati blow-up) with 2.
//! Validation failures are not errors; they are reported as data.

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter fails its admissibility constraint (negative variance,
    /// correlation outside (-1, 1), target below the risk-free benchmark, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An input is outside the domain of the requested operation
    /// (off-grid time point, negative lag, singular-point evaluation).
    #[error("domain error: {0}")]
    Domain(String),

    /// Two sampled curves were combined on incompatible grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A numerical scheme failed to deliver its stated accuracy
    /// (series did not converge, internal cross-check beyond tolerance).
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The Volterra-Riccati solution passed the blow-up guard threshold.
    /// `time` is the first grid point at which the guard tripped.
    #[error("solution explosion at t = {time:.6e} (|f| > {threshold:.1e})")]
    Explosion { time: f64, threshold: f64 },

    /// Malformed run configuration (unknown keys, missing sections, bad preset).
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) | Error::Io(_) => 1,
            Error::Domain(_)
            | Error::GridMismatch(_)
            | Error::Numeric(_)
            | Error::Explosion { .. } => 2,
        }
    }
}
