//! Coalescent-theory workbench.
//!
//! Exact formulas for exchangeable random partitions and Λ-coalescents,
//! together with simulators for the corresponding stochastic processes
//! (coalescents, forward population models, continuous-state branching
//! processes and coalescing particle systems on tori). Every simulator is a
//! pure function of its inputs and an [`numerics::RngStream`], so replicates
//! are reproducible and can be run in parallel.

pub mod bolthausen;
pub mod cli;
pub mod csbp;
pub mod history;
pub mod kingman;
pub mod lambda;
pub mod mutation;
pub mod numerics;
pub mod partition;
pub mod popmodels;
pub mod spatial;

pub use history::CoalescentHistory;
pub use lambda::LambdaMeasure;
pub use numerics::RngStream;
pub use partition::{AlleleSpectrum, MassPartition, Partition, PdParams};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge (partial value {partial}, error estimate {error})")]
    NoConvergence { partial: f64, error: f64 },

    #[error("integral diverges (partial value {partial} after {doublings} doublings)")]
    Diverges { partial: f64, doublings: usize },

    #[error("bracket violation: g(lo) = {g_lo}, g(hi) = {g_hi}, target = {target}")]
    Bracket { g_lo: f64, g_hi: f64, target: f64 },

    #[error("goodness-of-fit test not applicable: {0}")]
    Gof(String),

    #[error("undecidable without an asymptotic hint: {0}")]
    NeedsHint(String),

    #[error("criteria disagree: {0}")]
    CriteriaDisagree(String),

    #[error("not supported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
