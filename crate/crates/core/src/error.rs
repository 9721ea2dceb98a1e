//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {message}")]
    InvalidParameter { field: &'static str, message: String },

    /// Resonant empty-cavity count rate above the off-resonant rate; the
    /// contrast relation I₁/I₀ = (1−β)² has no solution with β ∈ [0, 1].
    #[error("contrast domain error: resonant rate {i1} exceeds off-resonant rate {i0}")]
    ContrastDomain { i0: f64, i1: f64 },

    /// Atoms suppressed the intra-cavity field completely (I₂ = I₀); the
    /// field-ratio inversion diverges.
    #[error("field-ratio saturation: atom-peak rate equals the off-resonant rate")]
    AtomNumberSaturated,

    #[error("detector saturated: {counts} counts in one bin is at or beyond the dead-time limit")]
    DeadTimeSaturated { counts: f64 },

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("detuning grid is not uniform at index {index}: step {found:e}, expected {expected:e}")]
    NonUniformGrid { index: usize, found: f64, expected: f64 },

    #[error("detuning grid span {span:e} rad/s is below 10x the kernel width {fwhm:e} rad/s")]
    GridTooNarrow { span: f64, fwhm: f64 },

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("no spectral feature above the noise floor")]
    WidthUndefined,

    #[error("missing excitation-on marker")]
    MissingMarker,

    #[error("config error: {0}")]
    Config(String),

    #[error("validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),

    #[error("malformed data file {path}: {message}")]
    DataFormat { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for configuration/validation
    /// problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::Config(_)
            | Error::Validation(_)
            | Error::DataFormat { .. }
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
