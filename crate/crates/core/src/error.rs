use thiserror::Error;

/// Errors raised by the physics and numerics modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("mode {mode} is overdamped: omega_n = {omega} <= beta/(2 lambda) = {threshold}")]
    OverdampedMode {
        mode: usize,
        omega: f64,
        threshold: f64,
    },

    #[error("tabulated coupling has a negative |f|^2 entry {value} at omega = {omega}")]
    NonIntegrableCoupling { omega: f64, value: f64 },

    #[error("an ultraviolet cutoff is required: the integrand does not decay")]
    CutoffRequired,

    #[error("mode frequency {omega} exceeds the cutoff {cutoff}; no resonant bath modes")]
    CutoffExceeded { omega: f64, cutoff: f64 },

    #[error("grid too coarse: {what} spacing {spacing} exceeds {limit}")]
    GridTooCoarse {
        what: &'static str,
        spacing: f64,
        limit: f64,
    },

    #[error("quadrature failed to reach relative tolerance {tol}: estimated error {error} on value {value}")]
    QuadratureDivergence { value: f64, error: f64, tol: f64 },

    #[error("integrator step {step} too large: fastest frequency {omega_max} gives omega*step = {product} >= 0.5")]
    StepTooLarge {
        step: f64,
        omega_max: f64,
        product: f64,
    },

    #[error("fit window [{start}, {end}] lies outside the run [0, {t_end}]")]
    WindowOutsideRun { start: f64, end: f64, t_end: f64 },

    #[error("fit window ends at {end}, past the bath recurrence time {recurrence}")]
    RecurrenceContamination { end: f64, recurrence: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
