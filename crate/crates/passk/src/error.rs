//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate problem id {id:?}")]
    DuplicateProblem { line: usize, id: String },

    #[error("problem {id:?}: successes exceed attempts ({successes} > {attempts})")]
    SuccessesExceedAttempts {
        id: String,
        successes: u64,
        attempts: u64,
    },

    #[error("problem {id:?}: requested {requested} outcomes but the pool holds {available}")]
    PoolTooSmall {
        id: String,
        requested: u64,
        available: u64,
    },

    #[error("problem {id:?}: pool is empty")]
    EmptyPool { id: String },

    #[error("no problems in input")]
    EmptyInput,

    #[error("k = {k} exceeds the attempt count {attempts} of problem {id:?}")]
    KExceedsAttempts { id: String, k: u64, attempts: u64 },

    #[error("k must be at least 1")]
    KIsZero,

    #[error("problem {id:?} has no attempts")]
    ZeroAttempts { id: String },

    #[error("{context}: parameters must be positive (alpha = {alpha}, beta = {beta})")]
    NonPositiveParams {
        context: &'static str,
        alpha: f64,
        beta: f64,
    },

    #[error("scale parameter theta = {theta} outside (0, 1]")]
    InvalidTheta { theta: f64 },

    #[error("attempt counts are not uniform (found {first} and {second}); {context}")]
    NonUniformAttempts {
        first: u64,
        second: u64,
        context: &'static str,
    },

    #[error("degenerate scale: no problem has a recorded success")]
    DegenerateScale,

    #[error("invalid bin edges: {message}")]
    InvalidBins { message: String },

    #[error("regression needs at least 2 usable points, found {usable} after excluding {excluded} zero values")]
    TooFewRegressionPoints { usable: usize, excluded: usize },

    #[error(
        "alternating series cancelled for attempts = {attempts}, successes = {successes}, \
         theta = {theta}; the likelihood is numerically indeterminate"
    )]
    SeriesCancellation {
        attempts: u64,
        successes: u64,
        theta: f64,
    },

    #[error("quadrature did not converge over [{lo}, {hi}]")]
    QuadratureNonConvergence { lo: f64, hi: f64 },

    #[error("fit did not converge after {restarts} restarts; best point returned")]
    FitNonConvergence { restarts: usize },

    #[error("source exhausted on problem {problem} at step {step}")]
    SourceExhausted { problem: usize, step: u64 },

    #[error("invalid difficulty spec: {0}")]
    InvalidSpec(String),

    #[error("curves have mismatched k grids")]
    MismatchedGrids,

    #[error("{failed} of {resamples} bootstrap refits failed (more than 20%)")]
    BootstrapFitFailures { failed: usize, resamples: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
