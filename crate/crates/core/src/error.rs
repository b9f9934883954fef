use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {reason}")]
    MalformedRow { path: PathBuf, line: usize, reason: String },
    #[error("trace contains no frames")]
    EmptyTrace,
    #[error("invalid trace metadata: {0}")]
    InvalidMeta(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("window of {window} frames exceeds trace length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("AR process is not stable (reflection coefficient {0:.4} at or beyond unit magnitude)")]
    UnstableProcess(f64),
    #[error("empirical distribution has no samples")]
    EmptyDistribution,
    #[error("series is constant; autocorrelation undefined")]
    ConstantSeries,
    #[error("lag {lag} requires a series longer than {len}")]
    LagTooLarge { lag: usize, len: usize },
    #[error("index range [{start}, {end}) outside trace of length {len}")]
    OutOfRange { start: usize, end: usize, len: usize },
    #[error("trace of length {len} is too short; need at least {needed} frames")]
    TraceTooShort { len: usize, needed: usize },
    #[error("design matrix is rank deficient (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },
    #[error("quantile regression did not converge after {iterations} iterations (last relative step {last_step:.3e})")]
    NoConvergence { iterations: usize, last_step: f64 },
    #[error("expected {expected} history samples, got {got}")]
    HistoryLengthMismatch { expected: usize, got: usize },
    #[error("scope mismatch: {0}")]
    ScopeMismatch(String),
    #[error("sample is degenerate: all values equal the location")]
    DegenerateSample,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("aggregate distribution is numerically ill-conditioned (sum of |weights| {weight_mass:.3e}); use a larger cluster tolerance")]
    NumericallyIllConditioned { weight_mass: f64 },
    #[error("latency budget is infeasible: T_tx = {0:.6} s")]
    InfeasibleBudget(f64),
    #[error("user {0} has no predictor")]
    PredictorMissing(usize),
    #[error("trace for user {user} exhausted: needs {needed} frames, has {len}")]
    TraceExhausted { user: usize, needed: usize, len: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::NoConvergence { .. }
                | Error::NumericallyIllConditioned { .. }
                | Error::UnstableProcess(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
