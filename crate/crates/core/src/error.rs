use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },

    #[error("no ticker survives the liquidity filter")]
    EmptyUniverse,

    #[error("panel has missing prices (ticker {ticker}, row {row})")]
    MissingData { ticker: String, row: usize },

    #[error("ticker {ticker} has zero variance")]
    ZeroVariance { ticker: String },

    #[error("non-positive standard deviation for ticker {ticker}")]
    NonPositiveSigma { ticker: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("noise band is empty; no eigenvalue lies in [{lower}, {upper}]")]
    EmptyNoiseBand { lower: f64, upper: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("target return {target} outside the feasible interval [{low}, {high}]")]
    Infeasible { target: f64, low: f64, high: f64 },

    #[error("no asset has a positive mean return")]
    NoPositiveReturn,

    #[error("division by zero predicted risk at grid point {index}")]
    ZeroPredictedRisk { index: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("ticker sets differ between panels")]
    TickerMismatch,

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        Error::Parse {
            line,
            column: String::new(),
            message: e.to_string(),
        }
    }
}
