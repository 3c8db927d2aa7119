use thiserror::Error;

/// Errors raised by the operators, forward model and solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BrtError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("direction is not a unit vector: |u| = {0}")]
    NotUnit(f64),

    #[error("source direction ({0}, {1}) is not aligned with the horizontal sampling axis")]
    Alignment(f64, f64),

    #[error("degenerate angle: |theta_s . theta_d| = {0:e} is too small for the fast operator")]
    DegenerateAngle(f64),

    #[error("fast operator does not support back-scatter pairs (theta_s . theta_d = {0} > 0)")]
    BackScatter(f64),

    #[error("fast operator does not support transmission pairs")]
    TransmissionPair,

    #[error("grid mismatch: expected {expected}, got {got}")]
    GridMismatch { expected: String, got: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("negative value {value} at index {index} in an image that must be nonnegative")]
    NegativeImage { index: usize, value: f64 },

    #[error("scatter value {value} at index {index} is outside [0, 1]")]
    ScatterOutOfRange { index: usize, value: f64 },

    #[error("model mean is zero at pair {pair}, sample {sample} where data are {data}")]
    ModelZeroWithData { pair: usize, sample: usize, data: f64 },

    #[error("zero denominator in scatter derivative at sample {0}")]
    ZeroDenominator(usize),

    #[error("operator has no nonzero rows; Z0 = {0}")]
    DegenerateOperator(f64),

    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    #[error("shape extends outside the grid: {0}")]
    OutOfBounds(String),

    #[error("negative input {value} at index {index}")]
    NegativeInput { index: usize, value: f64 },

    #[error("root solve failed: {0}")]
    RootSolveFailure(String),

    #[error("objective increased from {before} to {after} at iteration {iteration} ({half} half step)")]
    MonotonicityViolation {
        iteration: usize,
        half: &'static str,
        before: f64,
        after: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, BrtError>;
