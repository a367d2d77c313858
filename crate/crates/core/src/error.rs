use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid level pair ({0}, {1}); expected k < l with k, l in {{0, 1, 2}}")]
    InvalidPair(usize, usize),

    #[error("both STIRAP envelopes vanish; mixing angle and dark state are undefined")]
    UndefinedMixingAngle,

    #[error("counterdiabatic envelope requires a nonzero pulse separation")]
    ZeroSeparation,

    #[error("degenerate spectrum near t = {t} ns (minimum gap {gap:e} rad/ns)")]
    DegenerateSpectrum { t: f64, gap: f64 },

    #[error("loop phase undefined: coupling ({0}, {1}) vanishes")]
    UndefinedLoopPhase(usize, usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("integration failed at t = {t} ns: {reason}")]
    Integration { t: f64, reason: String },

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("ill-conditioned calibration traces (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("trace length mismatch: {0}")]
    TraceMismatch(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Self::InvalidParameter { name, reason: reason.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Self::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
