use thiserror::Error;

use crate::requirements::FeasibilityReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input has {got} features but feature {needed} is referenced")]
    DimensionMismatch { needed: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("label {label} is outside 1..={count}")]
    LabelOutOfRange { label: usize, count: usize },

    #[error("margin is undefined for a single-class hypothesis")]
    SingleClass,

    #[error("theta must be positive, got {0}")]
    NonpositiveTheta(f64),

    #[error("rho must be positive, got {0}")]
    NonpositiveRho(f64),

    #[error("norm exponent p must lie in [1, 2], got {0}")]
    InvalidP(f64),

    #[error("{} input(s) have no feasible label", .0.infeasible.len())]
    InfeasibleInput(FeasibilityReport),

    #[error("score magnitude {score} is not below the mask constant {mask}")]
    MaskConstantViolated { score: f64, mask: f64 },

    #[error("factor graph is not a chain")]
    NotAChain,

    #[error("no label sequence satisfies the requirement")]
    Infeasible,

    #[error("output space of size {size} exceeds the enumeration cap {cap}")]
    TooLarge { size: u128, cap: u128 },

    #[error("{0} required labels exceed the bitmask budget of 16")]
    TooManyRequiredLabels(usize),

    #[error("input is not part of the tabulated domain")]
    UnknownInput,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn from_json(err: serde_json::Error) -> Self {
        match err.classify() {
            serde_json::error::Category::Data => Error::Schema(err.to_string()),
            _ => Error::Parse {
                line: err.line(),
                column: err.column(),
                message: err.to_string(),
            },
        }
    }
}
