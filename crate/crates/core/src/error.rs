use thiserror::Error;

use crate::analysis::OptimizationReport;
use crate::montecarlo::McEstimate;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("target density integrates to {mass}, expected 1")]
    DensityNotNormalized { mass: f64 },

    #[error("target distribution has an atom at the origin")]
    AtomAtOrigin,

    #[error("target distribution is supported on one side of the origin only ({side})")]
    OneSided { side: &'static str },

    #[error("no closed-form harmonic function for this rate: {0}")]
    NoClosedForm(String),

    #[error("harmonic function of kind {declared} has integrability type {found}")]
    KindMismatch { declared: String, found: String },

    #[error("inadmissible harmonic candidate: {0}")]
    InadmissiblePhi(String),

    #[error("computational domain too small: log-derivative at {x} is {psi}, tail law predicts {expected}")]
    DomainTooSmall { x: f64, psi: f64, expected: f64 },

    #[error("grid too coarse: ODE residual {residual:e} at x = {x}")]
    GridTooCoarse { x: f64, residual: f64 },

    #[error("ODE integration stalled at x = {0}")]
    IntegrationStalled(f64),

    #[error("point {x} lies outside the computed domain [{lo}, {hi}]")]
    DomainExceeded { x: f64, lo: f64, hi: f64 },

    #[error("boundary value system is singular (determinant {det:e})")]
    SingularSystem { det: f64 },

    #[error("finiteness channels disagree: classifier says {classifier}, quadrature says {quadrature}")]
    ChannelDisagreement { classifier: String, quadrature: String },

    #[error("target point {a} lies outside the search interval [-{l1}, {l2}]")]
    TargetOutsideInterval { a: f64, l1: f64, l2: f64 },

    #[error("{fraction:.3} of paths were censored at t_max")]
    ExcessCensoring { fraction: f64, estimate: Box<McEstimate> },

    #[error("optimum lies on the boundary of the search box")]
    BoxExhausted { report: Box<OptimizationReport> },

    #[error("growth fit needs finite values, E[T_a] is infinite at a = {0}")]
    InfiniteSample(f64),

    #[error("objective is not finite anywhere on the search range")]
    NonFinite,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
