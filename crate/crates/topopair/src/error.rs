use thiserror::Error;

/// Crate-wide error type.
///
/// `Config` variants describe bad inputs (rejected before any numerics run);
/// the remaining variants describe numerical failures.  The CLI maps the two
/// groups to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("eigensolver residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    Residual { residual: f64, tol: f64 },

    #[error("spectrum is gapless (largest gap width {width:.3e} below tolerance)")]
    Gapless { width: f64 },

    #[error("state amplitude underflows for the requested widths (max envelope {max:.3e})")]
    Underflow { max: f64 },

    #[error("state has no weight in the edge-edge subspace (weight {weight:.3e} < {min:.3e})")]
    EmptyProjection { weight: f64, min: f64 },

    #[error("{requested} sites exceeds the {limit}-site limit for {what}")]
    SizeGuard {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("degenerate denominator: {0}")]
    Degenerate(String),

    #[error("{failed} of {total} ensemble instances failed (first: {first})")]
    EnsembleFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("propagator series did not converge: {0}")]
    Convergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl Error {
    /// True for errors that describe rejected input rather than a numerical
    /// failure encountered mid-computation.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Dimension(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
