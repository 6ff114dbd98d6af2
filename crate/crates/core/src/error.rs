use thiserror::Error;

use crate::data_io::{ConfigError, LibSvmError};

#[derive(Debug, Error)]
pub enum Error {
    #[error("block count m = {m} is invalid for dimension d = {d} (need 1 <= m <= d)")]
    BlockCount { d: usize, m: usize },

    #[error(
        "tau * m = {product} is not an integer (tau = {tau}, m = {m}); nearest feasible tau values are {below} and {above}"
    )]
    NonIntegerTau {
        tau: f64,
        m: usize,
        product: f64,
        below: String,
        above: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("problem construction failed: {0}")]
    Construction(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("reference solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("enumeration of {count} outcomes exceeds the limit of {limit}")]
    CombinatorialBlowup { count: f64, limit: f64 },

    #[error("stepsize {gamma} violates the bound {bound} required by {rule}")]
    StepsizeBound {
        gamma: f64,
        bound: f64,
        rule: &'static str,
    },

    #[error("metric is exactly zero at round {round}; cannot fit a log-linear rate")]
    ZeroMetric { round: u64 },

    #[error("delay {delay} at round {round} exceeds the bound M = {bound}")]
    DelayBound { round: u64, delay: u64, bound: u64 },

    #[error("round grids do not match: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    LibSvm(#[from] LibSvmError),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
