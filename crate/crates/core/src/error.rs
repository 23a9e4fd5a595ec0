use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sideband not resolved: omega_m ({omega_m:e} rad/s) must exceed kappa ({kappa:e} rad/s)")]
    UnresolvedSideband { omega_m: f64, kappa: f64 },

    #[error("noise band half-width {half_width:e} rad/s exceeds the Nyquist limit {nyquist:e} rad/s")]
    AboveNyquist { half_width: f64, nyquist: f64 },

    #[error("envelope under-resolved: {what} = {value:e} exceeds {limit}")]
    Unresolved { what: &'static str, value: f64, limit: f64 },

    #[error("uniform variate {0} outside [0, 1)")]
    UniformOutOfRange(f64),

    #[error("closed-form quasi-static average requires q > 0 (got {0:e}); use the Monte Carlo estimator for blue-side drives")]
    NonPositiveTransduction(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("series of length {len} is shorter than one segment ({segment})")]
    TooShort { len: usize, segment: usize },

    #[error("integration diverged at t = {time:e} s")]
    Diverged { time: f64 },

    #[error("spectrum is flat; no peak to fit")]
    FlatSpectrum,

    #[error("malformed parameter file: {0}")]
    ParamFile(String),

    #[error("invalid sweep plan: {0}")]
    Plan(String),

    #[error("malformed column file: {0}")]
    ColumnFile(String),

    #[error(transparent)]
    Io(#[from] IoError),
}

/// `std::io::Error` is neither `Clone` nor `PartialEq`; keep its kind and text.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{kind:?}: {message}")]
pub struct IoError {
    pub kind: std::io::ErrorKind,
    pub message: String,
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(IoError {
            kind: e.kind(),
            message: e.to_string(),
        })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
