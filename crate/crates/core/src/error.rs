use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("CFL violation: dt/dx = {ratio} exceeds {limit}")]
    Cfl { ratio: f64, limit: f64 },

    #[error("horizon too short: prehistory horizon {horizon} < 5/gamma = {required}")]
    HorizonTooShort { horizon: f64, required: f64 },

    #[error("cone violation: signals reach x = {reach} but the grid ends at {boundary}")]
    ConeViolation { reach: f64, boundary: f64 },

    #[error("instability detected at t = {t}: max|u| = {max_abs} exceeds {limit}")]
    Instability { t: f64, max_abs: f64, limit: f64 },

    #[error("probe inside support: probe at {probe} lies within [-{r}, {r}]")]
    ProbeInsideSupport { probe: f64, r: f64 },

    #[error("window too short: {fraction:.3e} of the scattered energy has not crossed the probes")]
    WindowTooShort { fraction: f64 },

    #[error("window not decayed: relative amplitude {ratio:.3e} at the {side} end")]
    WindowNotDecayed { side: &'static str, ratio: f64 },

    #[error("omega too close to zero: |omega + i sigma| = {modulus} < {epsilon}")]
    OmegaNearZero { modulus: f64, epsilon: f64 },

    #[error("convolution kernel truncated above tolerance: discarded tail fraction {tail:.3e}")]
    KernelTruncated { tail: f64 },

    #[error("no convergence in {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
