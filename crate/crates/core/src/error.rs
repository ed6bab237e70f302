use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dimension limit exceeded: {requested} > {limit} ({what})")]
    DimensionLimit {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    /// Upward rate is not below the downward rate; no thermal steady state.
    #[error("gain regime: {0}")]
    GainRegime(String),

    #[error("invalid integrator settings: {0}")]
    Settings(String),

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("Fock truncation too small: {message} (try dim >= {suggested_dim})")]
    Truncation { message: String, suggested_dim: usize },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("g2(0) undefined: mean photon number {n_mean:e} below floor {floor:e}")]
    UndefinedCorrelation { n_mean: f64, floor: f64 },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
