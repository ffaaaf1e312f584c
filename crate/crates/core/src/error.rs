use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("level {level} is outside 0..={max}")]
    LevelOutOfRange { level: usize, max: usize },

    #[error("bid vector has {got} coordinates, grid has {expected} bidders")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain too large: {points} grid points exceed the cap of {cap}")]
    DomainTooLarge { points: usize, cap: usize },

    #[error("at least two bidders are required, got {0}")]
    TooFewBidders(usize),

    #[error("set is not upward closed: {0}")]
    NotUpwardClosed(String),

    #[error("invalid benchmark: {0}")]
    InvalidBenchmark(String),

    #[error("benchmark is not symmetric; symmetric-only checks need a symmetric benchmark")]
    NotSymmetric,

    #[error("invalid supply k={k} for n={n} bidders (need 2 <= k < n)")]
    InvalidSupply { k: usize, n: usize },

    #[error("benchmark is not {lambda}-attainable")]
    NotAttainable { lambda: Rational },

    #[error("synthesis exceeded the iteration cap of {0} steps")]
    IterationCapExceeded(usize),

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),

    #[error("revenue table is not monotone in the own bid: {0}")]
    NonMonotoneRevenue(String),

    #[error("invalid auction profile: {0}")]
    InvalidProfile(String),

    #[error("rescaled bid at level {level} exceeds the inner grid's top level {max}")]
    GridOverflow { level: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
