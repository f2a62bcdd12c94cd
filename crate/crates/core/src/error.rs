use thiserror::Error;

use crate::bsa::SegmentFailure;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid step size {h}: must satisfy 0 < h <= {width}")]
    InvalidStep { h: f64, width: f64 },

    #[error("step size {h} does not evenly partition an interval of width {width}")]
    StepNotDivisor { h: f64, width: f64 },

    #[error("invalid integrand domain [{lower}, {upper}]")]
    InvalidDomain { lower: f64, upper: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("two samples share the abscissa {0}")]
    DuplicateAbscissa(f64),

    #[error("at least one sample is required")]
    EmptySamples,

    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("kernel matrix is not positive definite (jitter up to {jitter:e})")]
    FactorizationFailure { jitter: f64 },

    #[error("posterior uncertainty at h = 0 is zero; nothing left to refine")]
    DegenerateUncertainty,

    #[error("acceleration is singular at the origin")]
    SingularPosition,

    #[error("state became non-finite at t = {time}")]
    NonFiniteState { time: f64 },

    #[error("segment failed to converge at t = {}", .0.time)]
    SegmentFailure(Box<SegmentFailure>),
}
