//! Error type shared by every module of the crate.

/// Crate-wide error enumeration.
///
/// Variants are deliberately specific: callers (the CLI, the sweep drivers)
/// distinguish genuine numerical failures from *data* such as a relaxation
/// threshold that the stationary state never reaches.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The zero-frequency rate diverges for this spectral density and no
    /// explicit override was supplied.
    #[error("zero-frequency rate diverges for this spectral density; supply an explicit override")]
    DivergentAtZero,

    /// A floating-point argument was NaN or infinite where a finite value is required.
    #[error("non-finite input: {what} = {value}")]
    NonFinite { what: &'static str, value: f64 },

    /// A parameter violated a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An index addressed past the end of a shell ladder or coefficient list.
    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    /// A computational-basis label does not fit in the declared register width.
    #[error("basis label {label} does not fit in {bits} bits")]
    LabelWidth { label: u64, bits: u32 },

    /// Two objects that must agree in dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The requested system size exceeds what this representation supports.
    #[error("system size {dim} exceeds the supported maximum {max}")]
    ScaleExceeded { dim: usize, max: usize },

    /// Time stepping broke down (step-size underflow, non-finite state, ...).
    #[error("integration failed: {0}")]
    IntegrationFailure(String),

    /// An iterative eigenvalue or root search exceeded its sweep budget.
    #[error("iteration did not converge: {0}")]
    ConvergenceFailure(String),

    /// A linear system had no usable pivot.
    #[error("linear system is singular to working precision (pivot {pivot:.3e} in column {column})")]
    SingularSystem { pivot: f64, column: usize },

    /// Output times must be finite, non-negative and non-decreasing.
    #[error("times must be finite, non-negative and non-decreasing")]
    UnsortedTimes,

    /// No inverse temperature up to the search cap realizes the requested
    /// stationary ground probability.
    #[error("ground probability {target} is not attainable (inverse-temperature search capped at {cap})")]
    UnattainableTarget { target: f64, cap: f64 },

    /// The trajectory's stationary ground population lies below the crossing
    /// threshold, so the relaxation time does not exist. Sweeps report this as
    /// a data row, not as a failure.
    #[error("stationary ground population {stationary} never reaches threshold {threshold}")]
    UnreachableThreshold { stationary: f64, threshold: f64 },

    /// The ground-population samples do not approach the stationary value
    /// monotonically, so a crossing time would be ill-defined.
    #[error("ground population is not monotone towards its stationary value on the sample grid")]
    NotMonotone,

    /// Too few samples or data points for the requested operation.
    #[error("need at least {need} data points, got {got}")]
    InsufficientData { need: usize, got: usize },

    /// The sample grid undersamples the emission flash.
    #[error("grid too coarse around the emission peak: {samples} samples above half maximum (need >= {need})")]
    GridTooCoarse { samples: usize, need: usize },

    /// A sampled curve has no usable maximum.
    #[error("sampled intensity has no usable peak")]
    NoPeak,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the error carries sweep *data* (an unreachable threshold)
    /// rather than a computational failure.
    pub fn is_unreachable(&self) -> bool {
        matches!(self, Error::UnreachableThreshold { .. })
    }
}

/// Validate that a value is finite, returning it on success.
pub(crate) fn ensure_finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, value })
    }
}

/// Validate a strictly positive, finite value.
pub(crate) fn ensure_positive(what: &'static str, value: f64) -> Result<f64> {
    ensure_finite(what, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter(format!("{what} must be > 0, got {value}")))
    }
}
