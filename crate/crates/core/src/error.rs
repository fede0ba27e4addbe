use std::io;

use thiserror::Error;

/// Errors raised by the solver, the validation suite, and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sample index {index} out of range for dataset of size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point is infeasible: {0}")]
    Infeasible(String),

    /// `ℓ_i(w)/λ` exceeded the configured exponent cap; λ0 is too small for the loss scale.
    #[error(
        "overflow guard tripped on sample {sample}: exponent {exponent:.3e} exceeds cap {cap}"
    )]
    OverflowGuard {
        sample: usize,
        exponent: f64,
        cap: f64,
    },

    #[error("not a probability vector: {0}")]
    NotProbabilityVector(String),

    /// A theory schedule demands more iterations than the budget allows.
    #[error("stage {stage} requires T_k = {required:.3e} iterations, budget is {budget}")]
    BudgetExceeded {
        stage: usize,
        required: f64,
        budget: u64,
    },

    #[error(
        "bisection did not converge after {iterations} iterations (bracket width {width:.3e})"
    )]
    BisectionFailed { iterations: usize, width: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown label {label:?} at line {line}")]
    UnknownLabel { line: usize, label: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("operation requires a convex loss model")]
    NonConvexModel,

    #[error("n = {n} exceeds the cap {cap} for exact full-batch diagnostics")]
    TooLarge { n: usize, cap: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidParameter(_)
            | Error::Parse { .. }
            | Error::UnknownLabel { .. }
            | Error::EmptyDataset
            | Error::NonConvexModel
            | Error::DimensionMismatch { .. } => 2,
            Error::OverflowGuard { .. } | Error::BisectionFailed { .. } => 3,
            Error::BudgetExceeded { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
