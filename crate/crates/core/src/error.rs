use std::io;

use thiserror::Error;

use crate::driver::SquishTrace;

pub type Result<T, E = SquishError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SquishError {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("integral index out of range on line {line}: {index} not in [1, {norb}]")]
    Index { line: usize, index: i64, norb: usize },

    #[error("conflicting values for integral {indices:?}: {first} vs {second} (line {line})")]
    Conflict {
        line: usize,
        indices: [usize; 4],
        first: f64,
        second: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("eigensolver did not converge (best residual {best_residual:.3e}){}", context_suffix(.iteration))]
    Convergence {
        best_residual: f64,
        iteration: Option<usize>,
    },

    #[error("iteration limit reached after {} iterations", .0.records.len())]
    Timeout(Box<SquishTrace>),

    #[error(transparent)]
    Io(#[from] io::Error),
}

fn context_suffix(iteration: &Option<usize>) -> String {
    match iteration {
        Some(k) => format!(" at iteration {k}"),
        None => String::new(),
    }
}

impl SquishError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        SquishError::Parse {
            line,
            message: message.into(),
        }
    }

    /// Attach the driver iteration index to an eigensolver failure.
    pub(crate) fn at_iteration(self, k: usize) -> Self {
        match self {
            SquishError::Convergence { best_residual, .. } => SquishError::Convergence {
                best_residual,
                iteration: Some(k),
            },
            other => other,
        }
    }
}
