use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A reviewer cannot be given the requested number of eligible reviewees.
    #[error("infeasible assignment: reviewer {reviewer} has {eligible} eligible candidates but needs {needed}")]
    InfeasibleAssignment {
        reviewer: usize,
        eligible: usize,
        needed: usize,
    },

    #[error("infeasible quota: cluster {cluster} needs {quota} agents but has {available} candidates")]
    InfeasibleQuota {
        cluster: usize,
        quota: usize,
        available: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that mean "this parameter combination cannot be run"
    /// rather than a bug or bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleAssignment { .. } | Error::InfeasibleQuota { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
