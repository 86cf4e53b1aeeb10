//! Error type shared across the library.

use std::fmt;

/// Errors produced by solvers, model construction, and selectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    InvalidArgument(String),
    /// Separation radius outside the admissible open interval (0, (2π)^{-σ} k^{-σ/2}).
    InfeasibleRadius { r: f64, max: f64 },
    /// The requested boundary level cannot be reached by any admissible radius.
    TargetUnattainable {
        target: f64,
        reachable: f64,
        /// Grid node index (1-based) when the failure occurred while building a grid.
        node: Option<usize>,
    },
    /// An iterative solver failed to bracket or converge; indicates an internal bug
    /// for inputs satisfying the preconditions.
    NoConvergence(String),
    /// A statistic support frequency has no observation.
    MissingFrequency(String),
    /// A frequency's arity does not match the subset cardinality.
    DimensionMismatch { expected: usize, got: usize },
    /// Two decision vectors are indexed by different subset ensembles.
    IndexMismatch(String),
    /// Referenced subset is not active in the model instance.
    UnknownSubset(String),
    /// Failure attributed to one order of an aggregate run.
    AtOrder { k: usize, inner: Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::InfeasibleRadius { r, max } => {
                write!(f, "infeasible radius: r = {r} outside (0, {max})")
            }
            Error::TargetUnattainable {
                target,
                reachable,
                node,
            } => {
                write!(f, "target unattainable: a-value target {target} exceeds reachable level {reachable}")?;
                if let Some(m) = node {
                    write!(f, " (grid node {m})")?;
                }
                Ok(())
            }
            Error::NoConvergence(msg) => write!(f, "no convergence: {msg}"),
            Error::MissingFrequency(msg) => write!(f, "missing frequency: {msg}"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected arity {expected}, got {got}")
            }
            Error::IndexMismatch(msg) => write!(f, "index mismatch: {msg}"),
            Error::UnknownSubset(msg) => write!(f, "unknown subset: {msg}"),
            Error::AtOrder { k, inner } => write!(f, "order {k}: {inner}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
