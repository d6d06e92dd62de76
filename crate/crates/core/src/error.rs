use alloc::string::String;

/// Failure modes shared across the engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("valid region exhausted after repeated differentiation")]
    RegionExhausted,
    #[error("metric degenerate at point {point} (min eigenvalue {min_eigenvalue:e})")]
    MetricDegenerate { point: usize, min_eigenvalue: f64 },
    #[error("degenerate plane (denominator {0:e})")]
    DegeneratePlane(f64),
    #[error("conformal factor not positive at point {0}")]
    NonPositiveConformalFactor(usize),
    #[error("blow-up detected at t = {t}: {reason}")]
    BlowUpDetected { t: f64, point: Option<usize>, reason: String },
    #[error("time step underflow at t = {t} (dt = {dt:e})")]
    StepUnderflow { t: f64, dt: f64 },
    #[error("insufficient snapshots: need {needed}, got {got}")]
    InsufficientSnapshots { needed: usize, got: usize },
    #[error("degenerate series: residuals at roundoff floor")]
    DegenerateSeries,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = core::result::Result<T, Error>;
