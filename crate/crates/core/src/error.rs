// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("definition error: {0}")]
    Definition(String),
    /// A broken precondition of a domain operation. Always a bug in the caller.
    #[error("internal error: {0}")]
    Internal(String),
    #[error("no inductive edge at {0}")]
    NoIndEdge(String),
    #[error("iteration budget of {0} exceeded")]
    IterationBudget(usize),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn internal<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Internal(msg.into()))
}
