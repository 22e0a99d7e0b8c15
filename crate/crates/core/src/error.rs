use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MfgError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("index {index} out of range for {what} of size {size}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("degenerate request: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("control {control:?} lies outside the control box")]
    ControlOutsideBox { control: Vec<f64> },

    #[error("simulation aborted at t={time}: {reason}")]
    Simulation { time: f64, reason: String },

    #[error("step-size failure at t={time}: weight {weight} of state {state} fell below the simplex tolerance")]
    StepSize { time: f64, state: usize, weight: f64 },

    #[error("hamiltonian minimization failed at t={time}, state {state}: {reason}")]
    Minimizer {
        time: f64,
        state: usize,
        reason: String,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, MfgError>;
