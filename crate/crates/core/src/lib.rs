//! Core of a conversational question-answering harness: question rewriting
//! history, BM25 passage retrieval, generator context assembly, evaluation
//! metrics and the success/failure split analysis.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the model
//! service client and the command line live in the `convqa` crate.
//!
//! ```
//! use convqa_core::index::{build_index, Bm25Params};
//! use convqa_core::corpus::Passage;
//!
//! let idx = build_index([
//!     Passage { id: "d1".into(), text: "dog".into() },
//!     Passage { id: "d2".into(), text: "cat cat dog".into() },
//! ]).unwrap();
//! let top = idx.search(&Bm25Params::default(), "cat", 10);
//! assert_eq!(top.len(), 1);
//! assert_eq!(top[0].id(), "d2");
//! ```
#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod analysis;
pub mod corpus;
pub mod error;
mod float;
pub mod generate;
pub mod index;
pub mod metrics;
pub mod pipeline;
pub mod rewrite;
pub mod text;

pub use corpus::{Conversation, Passage, RunRecord, ScoredPassage, Turn};
pub use error::{AnalysisError, BudgetError, CorpusError, IndexError, MetricError, RewriteError, ScoreError, ServiceError};
pub use index::{Bm25Index, Bm25Params, Ranking};
pub use metrics::{Metric, SampleScores, ScoreTable};
pub use pipeline::{GenerateMode, IndexedCollection, PipelineConfig, RewriteMode, Services};
