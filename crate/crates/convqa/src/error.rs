use std::io;
use std::path::PathBuf;

use convqa_core::pipeline::PipelineError;
use convqa_core::{AnalysisError, CorpusError, IndexError, ScoreError};
use thiserror::Error;

use crate::client::ClientError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}:{line}: duplicate passage id {id:?}", path.display())]
    DuplicatePassage { path: PathBuf, line: usize, id: String },
    #[error("{}: {source}", path.display())]
    Corpus { path: PathBuf, source: CorpusError },
    #[error("{}: {reason}", path.display())]
    Snapshot { path: PathBuf, reason: String },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Transport(#[from] ClientError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage or configuration, 2 data, 3 model transport.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Pipeline(PipelineError::MissingService(_)) => 1,
            Error::Transport(_) => 3,
            _ => 2,
        }
    }
}
