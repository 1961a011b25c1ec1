use alloc::boxed::Box;
use alloc::string::String;
use thiserror::Error;

use crate::train::RunResult;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A statistic is not defined for the input (constant vector, zero-norm
    /// row, fewer than two informative dimensions).
    #[error("undefined {0}")]
    Undefined(&'static str),
    #[error("degenerate representation: centered Gram matrix is zero")]
    Degenerate,
    #[error("variable {0} is not on this tape")]
    UnknownVar(usize),
    #[error("loss is not a scalar: shape {0:?}")]
    NotScalar((usize, usize)),
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("cannot build split: {0}")]
    Split(String),
    #[error("non-finite {term} at epoch {epoch}")]
    Divergence {
        epoch: usize,
        term: &'static str,
        partial: Box<RunResult>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(op: &'static str, lhs: (usize, usize), rhs: (usize, usize)) -> Self {
        Error::Shape { op, lhs, rhs }
    }
}
