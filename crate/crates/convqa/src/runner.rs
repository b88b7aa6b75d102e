//! Batch execution: conversations in parallel, turns in order.

use convqa_core::pipeline::{run_conversation, PipelineError};
use convqa_core::{Conversation, IndexedCollection, PipelineConfig, RunRecord, Services};
use rayon::prelude::*;
use serde::Serialize;

use crate::client::ModelClient;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub conversations: usize,
    pub turns: usize,
    pub rewrite_fallbacks: usize,
    pub generate_fallbacks: usize,
    /// Turns where a service call failed after every retry.
    pub transport_failures: usize,
}

impl RunSummary {
    pub fn of(conversations: usize, records: &[RunRecord]) -> Self {
        Self {
            conversations,
            turns: records.len(),
            rewrite_fallbacks: records.iter().filter(|r| r.rewrite_fallback).count(),
            generate_fallbacks: records.iter().filter(|r| r.generate_fallback).count(),
            transport_failures: records.iter().filter(|r| r.transport_failure).count(),
        }
    }
}

/// Runs every conversation on a pool of `jobs` threads. Records come back
/// in input order whatever the scheduling.
pub fn run_all(
    conversations: &[Conversation],
    collection: &IndexedCollection,
    config: &PipelineConfig,
    client: Option<&ModelClient>,
    jobs: usize,
) -> Result<(Vec<RunRecord>, RunSummary)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let per_conv: Vec<std::result::Result<Vec<RunRecord>, PipelineError>> = pool.install(|| {
        conversations
            .par_iter()
            .map(|conv| {
                let services = Services {
                    rewriter: client.map(|c| c as _),
                    generator: client.map(|c| c as _),
                };
                run_conversation(conv, collection, config, services)
            })
            .collect()
    });
    let mut records = Vec::new();
    for res in per_conv {
        records.extend(res?);
    }
    let summary = RunSummary::of(conversations.len(), &records);
    Ok((records, summary))
}
