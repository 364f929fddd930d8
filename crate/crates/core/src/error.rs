use alloc::string::String;

use thiserror::Error;

/// Failure of a pointwise numeric evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Error)]
pub enum DomainError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("point has no coordinate {0}")]
    MissingCoordinate(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("parse error at byte {pos}: {message}")]
pub struct ParseError {
    pub pos: usize,
    pub message: &'static str,
}

impl ParseError {
    pub fn new(pos: usize, message: &'static str) -> ParseError {
        ParseError { pos, message }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("metric is singular: {0}")]
    SingularMetric(String),
    #[error("second-order part is degenerate: {0}")]
    NonDegeneracyViolation(String),
    #[error("operators live on different charts")]
    ChartMismatch,
    #[error("grid resolution {0} per axis is below the minimum")]
    ResolutionTooLow(usize),
    #[error("observation h^{0} is constant")]
    ConstantObservation(usize),
    #[error("observation index {index} out of range (m = {count})")]
    NoSuchObservation { index: usize, count: usize },
    #[error("bracket identity violated: residual {residual:e}")]
    IdentityViolation { residual: f64 },
    #[error("field is constant; it has no isolated critical points")]
    DegenerateField,
    #[error("no critical point found in the search box")]
    NoCriticalPointFound,
    #[error("chart {0} is not compact")]
    NotCompact(String),
    #[error("certificate failed at A[{row}][{col}] = {value:e}: {reason}")]
    CertificateFailure {
        row: usize,
        col: usize,
        value: f64,
        reason: &'static str,
    },
    #[error("no gradient flow connecting two critical points was found")]
    FlowNotFound,
    #[error("trajectory left the chart box at t = {time}")]
    StepOutOfDomain { time: f64 },
    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    StabilityViolation { dt: f64, bound: f64 },
    #[error("density became non-finite at t = {time}")]
    NonFiniteDensity { time: f64 },
    #[error("log-weight spread {spread} exceeds 700")]
    WeightCollapse { spread: f64 },
    #[error("density has zero mass")]
    ZeroMass,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
