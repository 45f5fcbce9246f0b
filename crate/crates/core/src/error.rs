//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures raised by construction, evaluation and verification routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("non-finite value produced by a `{0}` node")]
    NumericDomain(&'static str),
    #[error("cannot expand expression: {0}")]
    EssentialSingularity(String),
    #[error("degenerate critical point: |lambda''| = {0:e}")]
    Degenerate(f64),
    #[error("discriminant guard: critical value of modulus {0:e}")]
    Discriminant(f64),
    #[error("series leading term mismatch: {0}")]
    WrongLeadingTerm(String),
    #[error("series truncation insufficient: residual {0:e}")]
    Truncation(f64),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("inadmissible point: {0}")]
    Inadmissible(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("quadrature: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, Error>;
