use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("conversation {conversation_no}: duplicate turn {turn_no}")]
    DuplicateTurn { conversation_no: String, turn_no: u32 },
    #[error("conversation {conversation_no}: turn {turn_no} breaks the 1..n turn sequence")]
    NonContiguousTurns { conversation_no: String, turn_no: u32 },
    #[error("conversation {conversation_no}: turn {turn_no} has an empty question")]
    EmptyQuestion { conversation_no: String, turn_no: u32 },
    #[error("conversation {conversation_no}, turn {turn_no}: {reason}")]
    InvalidRecord {
        conversation_no: String,
        turn_no: u32,
        reason: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("duplicate passage id {0:?}")]
    DuplicatePassage(String),
    #[error("empty passage id")]
    EmptyPassageId,
    #[error("unknown passage id {0:?}")]
    UnknownPassage(String),
    #[error("inconsistent index data: {0}")]
    Inconsistent(&'static str),
    #[error("too many documents or postings for a 32-bit index")]
    Overflow,
}

/// The token budget cannot hold the text that must always be kept.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("budget of {budget} tokens cannot hold a {required}-token input")]
pub struct BudgetError {
    pub budget: usize,
    pub required: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("turn {turn_no} has no truth rewrite; oracle rewriting needs gold data")]
    MissingTruthRewrite { turn_no: u32 },
    #[error(transparent)]
    Budget(#[from] BudgetError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("reference has no tokens")]
    EmptyReference,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("run records without a matching corpus turn: {0:?}")]
    UnknownTurns(Vec<(String, u32)>),
    #[error("corpus turns without a run record: {0:?}")]
    MissingTurns(Vec<(String, u32)>),
    #[error("duplicate run record for conversation {0}, turn {1}")]
    DuplicateRecord(String, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("no values to summarize")]
    Empty,
    #[error("quartile must be 1, 2 or 3, got {0}")]
    BadQuartile(u8),
    #[error("bin width must divide 1 evenly")]
    BadBinWidth,
    #[error("no sample has both a rewrite score and a retrieval score")]
    NothingToClassify,
}

/// Failure reported by an external model service.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("model service failed after {attempts} attempt(s): {message}")]
pub struct ServiceError {
    pub attempts: u32,
    pub message: String,
}
