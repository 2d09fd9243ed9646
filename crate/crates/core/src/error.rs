use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("player index {index} out of range for a game with {players} players")]
    PlayerIndex { index: usize, players: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("constraint set is infeasible or violates Slater's condition (best max_j g_j = {best})")]
    Infeasible { best: f64 },

    #[error("no active set satisfies the KKT conditions; the game may violate strong monotonicity")]
    NoKktSolution,

    #[error("operation requires a quadratic game")]
    NotQuadratic,

    #[error("{n} coupling constraints exceed the active-set enumeration limit of {limit}")]
    TooManyConstraints { n: usize, limit: usize },

    #[error("schedules violate step-size conditions: {0}")]
    InvalidSchedules(String),

    #[error("extragradient did not converge within {iterations} iterations (last step {last_step:e})")]
    NotConverged { iterations: usize, last_step: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("output directory {path} is not writable: {source}")]
    OutputDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
