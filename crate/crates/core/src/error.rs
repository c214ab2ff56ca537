use thiserror::Error;

use crate::stepper::DiscreteTrajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator is not symmetric positive-definite: {0}")]
    NotSpd(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("load rate is not available for this model")]
    MissingLoadRate,

    #[error("inner solver did not converge after {iters} iterations (residual {residual:.3e}, tolerance {tol:.3e})")]
    InnerNotConverged { iters: usize, residual: f64, tol: f64 },

    #[error("box projection did not converge after {iters} iterations (KKT residual {residual:.3e})")]
    ProjectionNotConverged { iters: usize, residual: f64 },

    #[error("subdifferential membership failed at step {step}: {detail}")]
    MembershipFailure { step: usize, detail: String },

    #[error("trajectory truncated at step {step}: {source}")]
    Truncated {
        step: usize,
        partial: Box<DiscreteTrajectory>,
        #[source]
        source: Box<Error>,
    },

    #[error("energy inequality violated on steps {m}..{n}: slack {slack:.3e} below {bound:.3e}")]
    LedgerViolation { m: usize, n: usize, slack: f64, bound: f64 },

    #[error("defect measure has a negative atom at t = {t:.6}: {value:.3e}")]
    NegativeAtom { t: f64, value: f64 },

    #[error("unstable initial state for the play operator: |u0 - f(0)| = {gap:.3e} > rho = {rho:.3e}")]
    UnstableInitialState { gap: f64, rho: f64 },

    #[error("config error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error("audit failure: {0}")]
    Audit(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            msg: msg.into(),
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(what: &str, x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.to_string()));
    }
    Ok(())
}
