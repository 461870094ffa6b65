use std::io;

use thiserror::Error;

/// Everything that can go wrong while building, solving or running an abstraction.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no points")]
    NoPoints,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension {dim} exceeds the supported limit of {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("numerically degenerate hull (singular value ratio {ratio:.3e})")]
    DegenerateHull { ratio: f64 },

    #[error("hull too large to enumerate: {0}")]
    HullTooLarge(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("parameter {0:?} is not in the unit simplex")]
    NotInSimplex(Vec<f64>),

    #[error("nominal state matrix is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("input outside control polytope")]
    InputOutsideControlSet,

    #[error("empty ambiguity set")]
    EmptyAmbiguitySet,

    #[error("no transitions")]
    NoTransitions,

    #[error("precondition violated: state outside backward reach set")]
    OutsideReachSet,

    #[error("infeasible instantiation at state {state}, action {action}")]
    InfeasibleInstantiation { state: usize, action: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
