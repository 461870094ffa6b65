//! Controller synthesis for linear stochastic systems whose dynamics are only
//! known up to a convex set of parameters.
//!
//! The pipeline partitions the state space, abstracts the system into an
//! interval Markov decision process with PAC transition intervals, solves it
//! with robust value iteration, and runs the resulting policy in closed loop.

pub mod abstraction;
pub mod benchmarks;
pub mod config;
pub mod error;
pub mod geometry;
pub mod imdp;
pub mod model;
pub mod pac;
pub mod pipeline;
pub mod runtime;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/models.md")]
    struct Models;
    #[doc = include_str!("../../../book/src/partitions.md")]
    struct Partitions;
    #[doc = include_str!("../../../book/src/intervals.md")]
    struct Intervals;
    #[doc = include_str!("../../../book/src/imdp.md")]
    struct Imdp;
    #[doc = include_str!("../../../book/src/pipeline.md")]
    struct Pipeline;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
