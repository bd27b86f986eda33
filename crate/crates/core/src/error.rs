use std::path::PathBuf;

use thiserror::Error;

/// Errors produced while configuring or running a simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid PER curve: {0}")]
    InvalidCurve(String),

    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),

    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),

    #[error("the {model} reception model cannot be used with {scheme}")]
    InvalidModel {
        model: &'static str,
        scheme: &'static str,
    },

    #[error("rank-deficient least-squares design: rank {rank} < {columns} columns")]
    RankDeficient { rank: usize, columns: usize },

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("target PLR {target} is not bracketed by the sweep")]
    TargetNotFound { target: f64 },

    #[error("no packets were sent")]
    NoPackets,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn scenario(msg: impl Into<String>) -> Self {
        Error::InvalidScenario(msg.into())
    }

    /// True for errors caused by the user's configuration rather than by the run itself.
    pub fn is_configuration(&self) -> bool {
        !matches!(self, Error::TargetNotFound { .. } | Error::NoPackets)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
