use thiserror::Error;

use crate::construct::lp::LpError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("ensemble size must be at least 1")]
    EmptyEnsemble,
    #[error("ensemble size m={0} must be odd here")]
    EvenEnsemble(usize),
    #[error("voter count v={v} must be odd and in 1..={m}")]
    InvalidVoterCount { m: usize, v: usize },
    #[error("error count i={i} exceeds ensemble size m={m}")]
    InvalidErrorCount { m: usize, i: usize },
    #[error("{name}={value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("sample count must be positive")]
    EmptySample,
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("distribution sums to {0}, not 1 (tolerance 1e-9)")]
    NotNormalized(f64),
    #[error("distribution entry w[{index}]={value} is not a probability")]
    InvalidProbability { index: usize, value: f64 },
    #[error("row {row}: {msg}")]
    MalformedMatrix { row: usize, msg: String },
    #[error("the direct estimator needs the full error matrix; sample holds counts only")]
    MissingMatrix,
    #[error("sample has m={sample}, basis has m={basis}")]
    BasisMismatch { sample: usize, basis: usize },
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit_open(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            range: "(0, 1)",
        })
    }
}
