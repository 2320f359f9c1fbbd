use thiserror::Error;

use crate::io::fmt_f64;
use crate::model::SystemState;

#[derive(Debug, Error)]
pub enum LabError {
    /// A parameter or state violates its documented invariant.
    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The binomial-sum payoff oracle is only defined for small groups.
    #[error("group size {size} exceeds oracle bound {bound}")]
    OracleSize { size: u32, bound: u32 },

    /// The state handed to `classify` is not an equilibrium.
    #[error("not a fixed point: scaled residual {residual:e} at ({}, {})", fmt_f64(.state.x), fmt_f64(.state.y))]
    Residual { state: SystemState, residual: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The integrator produced a non-finite value.
    #[error("numerical failure at t = {time}: {reason} (last valid state ({}, {}))", fmt_f64(.last_valid.x), fmt_f64(.last_valid.y))]
    NumericalFailure {
        time: f64,
        reason: String,
        last_valid: SystemState,
    },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("malformed config: {0}")]
    Config(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        LabError::Validation {
            what,
            reason: reason.into(),
        }
    }

    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::NumericalFailure { .. } => 3,
            LabError::Io(_) | LabError::Csv(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
