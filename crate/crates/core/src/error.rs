use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid vertex {vertex} (graph has {n} vertices)")]
    InvalidVertex { vertex: usize, n: usize },

    #[error("quadratic budget exceeded: n = {n} > budget {budget}")]
    BudgetExceeded { n: usize, budget: usize },

    #[error("vertex {0} has several parents in the pruned forest")]
    MultipleParents(usize),

    #[error("vertex {0} has no children")]
    ChildlessVertex(usize),

    #[error("vertex {0} has zero degree")]
    ZeroDegree(usize),

    #[error("graph is not cycle-free around {root}: {detail}")]
    NotCycleFree { root: usize, detail: String },

    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: u64, hi: u64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
