use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-monotonic time at line {line}")]
    NonMonotonicTime { line: usize },

    #[error("malformed container: {0}")]
    Format(String),

    #[error("unsupported container version {found} (this build reads version {expected})")]
    UnsupportedVersion { found: u16, expected: u16 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("too few valid samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("sampling intervals differ ({0} ms vs {1} ms)")]
    IntervalMismatch(f64, f64),

    #[error("degenerate variance at entry {index}: envelope width {width} with zero standard deviation")]
    DegenerateVariance { index: usize, width: f64 },

    #[error("shear factor {lambda} is not invertible for this profile (timestamps fold at sample {index})")]
    NonInvertibleShear { lambda: f64, index: usize },

    #[error("shear objective is not finite")]
    NonFiniteObjective,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("no amplitude bin holds enough profiles to build a model")]
    NoValidBins,

    #[error("sample at t={t} ms arrived after t={last} ms")]
    OutOfOrder { t: f64, last: f64 },

    #[error("velocity undefined: {0}")]
    UndefinedVelocity(&'static str),
}
