use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bandit spec: {}", format_violations(.0))]
    InvalidSpec(Vec<Violation>),

    #[error("{op} requires {expected} arms, spec has {actual}")]
    ArmCount {
        op: &'static str,
        expected: String,
        actual: usize,
    },

    #[error("{op} is not defined for {mode} mode")]
    WrongMode { op: &'static str, mode: String },

    #[error("kernel point has {actual} coordinates, expected {expected}")]
    PointDimension { expected: usize, actual: usize },

    #[error("invalid kernel point: {0}")]
    InvalidPoint(String),

    #[error("degenerate contexts: arms {0} and {1} share the same context vector")]
    DegenerateContexts(usize, usize),

    #[error("sample standard deviations must be positive and finite, got {0:?}")]
    NonPositiveSigma(Vec<f64>),

    #[error("quadrature did not converge: estimated error {achieved:e} exceeds {target:e}")]
    Quadrature { achieved: f64, target: f64 },

    #[error("batch size {batch_size} exceeds n/10 = {limit} (batches must be o(n) periods)")]
    BatchTooLarge { batch_size: usize, limit: usize },

    #[error("burn-in t_eps*n = {periods} periods is fewer than 2K = {required}; every arm needs two plays")]
    BurnInTooShort { periods: f64, required: usize },

    #[error("burn-in must satisfy 0 < t_eps < 1, got {0}")]
    BurnIn(f64),

    #[error("step size must satisfy 0 < h <= {max}, got {h}")]
    StepSize { h: f64, max: f64 },

    #[error("occupation path of arm {arm} is not strictly increasing at grid index {index}")]
    NotIncreasing { arm: usize, index: usize },

    #[error("paths must share one grid: {0} vs {1} points")]
    GridMismatch(usize, usize),

    #[error("empirical distribution needs at least 2 values, got {0}")]
    TooFewSamples(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
