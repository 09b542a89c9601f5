use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),

    #[error("point ({x}, {y}) lies outside the interface patch of radius {radius}")]
    OutsidePatch { x: f64, y: f64, radius: f64 },

    #[error("geometry too thin to resolve: {0}")]
    GeometryTooThin(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("system matrix is not positive definite (pivot {pivot:e} at row {row}); coefficients are invalid")]
    Indefinite { row: usize, pivot: f64 },

    #[error("coefficient does not match the one used to compute the solution")]
    CoefficientMismatch,

    #[error("constant solution: total gradient energy vanishes")]
    ConstantSolution,

    #[error("region extends outside the solved domain: {0}")]
    RegionOutsideDomain(String),

    #[error("ball B({cx}, {cy}; {radius}) is not contained in a single subdomain")]
    BallCrossesInterface { cx: f64, cy: f64, radius: f64 },

    #[error("no admissible ball centers at radius {0}")]
    NoAdmissibleCenters(f64),

    #[error("support condition violated: |u| = {value:e} at ({x}, {y}) outside the support box")]
    SupportViolated { x: f64, y: f64, value: f64 },

    #[error("too few reports: got {got}, need at least {need}")]
    TooFewReports { got: usize, need: usize },

    #[error("degenerate family: {0}")]
    DegenerateFamily(String),

    #[error("missing calibration: {0}")]
    MissingCalibration(String),

    #[error("power gap sign {sign} is inconsistent with jump type {jump}")]
    GapSignInconsistent { sign: f64, jump: String },

    #[error("zero inclusion energy with nonzero power gap {0:e}")]
    QuadratureInconsistency(f64),

    #[error("too few samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
