//! Rewrite, retrieve, generate: one conversation at a time.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Conversation, Passage, RunRecord};
use crate::error::{BudgetError, IndexError, RewriteError};
use crate::generate::{
    assemble_context, extractive_answer, generate_external, GenerateService, DEFAULT_USED_FRACTION,
};
use crate::index::{Bm25Index, Bm25Params, IndexBuilder, DEFAULT_TOP_K};
use crate::rewrite::{
    compose_history, rewrite_external, rewrite_none, rewrite_oracle, ConversationState, Fallback,
    HistorySource, RewriteService,
};
use crate::text::DEFAULT_BUDGET;

/// How the retrieval query and the scored rewrite are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RewriteMode {
    /// Question as-is; retrieval over the last `h` utterances.
    None { h: usize },
    /// Gold rewrites.
    Oracle,
    /// External rewriter fed with history from `source`.
    External { source: HistorySource },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerateMode {
    Extractive,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub bm25: Bm25Params,
    pub top_k: usize,
    pub rewrite: RewriteMode,
    pub rewrite_budget: usize,
    pub generate: GenerateMode,
    pub generate_budget: usize,
    pub used_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            bm25: Bm25Params::default(),
            top_k: DEFAULT_TOP_K,
            rewrite: RewriteMode::None { h: 1 },
            rewrite_budget: DEFAULT_BUDGET,
            generate: GenerateMode::Extractive,
            generate_budget: DEFAULT_BUDGET,
            used_fraction: DEFAULT_USED_FRACTION,
        }
    }
}

/// External services available to a run.
#[derive(Clone, Copy, Default)]
pub struct Services<'a> {
    pub rewriter: Option<&'a dyn RewriteService>,
    pub generator: Option<&'a dyn GenerateService>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("conversation {conversation_no}: {source}")]
    Rewrite {
        conversation_no: String,
        source: RewriteError,
    },
    #[error("conversation {conversation_no}, turn {turn_no}: {source}")]
    Budget {
        conversation_no: String,
        turn_no: u32,
        source: BudgetError,
    },
    #[error("{0} mode selected but no service configured")]
    MissingService(&'static str),
}

/// Passages indexed for retrieval, with their texts kept for generation.
#[derive(Debug, Clone)]
pub struct IndexedCollection {
    pub index: Bm25Index,
    /// Passage texts aligned with `index.doc_ids()`.
    pub texts: Vec<String>,
}

impl IndexedCollection {
    pub fn build<I: IntoIterator<Item = Passage>>(passages: I) -> Result<Self, IndexError> {
        let mut builder = IndexBuilder::new();
        let mut texts = Vec::new();
        for p in passages {
            builder.add(&p)?;
            texts.push(p.text);
        }
        Ok(Self {
            index: builder.finish(),
            texts,
        })
    }

    pub fn text(&self, id: &str) -> Option<&str> {
        self.index
            .doc_ordinal(id)
            .map(|d| self.texts[d as usize].as_str())
    }
}

/// Runs every turn of `conv` in order, threading model rewrites and answers
/// into the history of later turns.
pub fn run_conversation(
    conv: &Conversation,
    collection: &IndexedCollection,
    config: &PipelineConfig,
    services: Services<'_>,
) -> Result<Vec<RunRecord>, PipelineError> {
    let rewriter = match config.rewrite {
        RewriteMode::External { .. } => {
            Some(services.rewriter.ok_or(PipelineError::MissingService("external rewrite"))?)
        }
        _ => None,
    };
    let generator = match config.generate {
        GenerateMode::External => {
            Some(services.generator.ok_or(PipelineError::MissingService("external generate"))?)
        }
        GenerateMode::Extractive => None,
    };
    let budget_err = |turn_no, source| PipelineError::Budget {
        conversation_no: conv.conversation_no.clone(),
        turn_no,
        source,
    };

    let mut state = ConversationState::new();
    let mut records = Vec::with_capacity(conv.turns.len());
    for turn in &conv.turns {
        let question = turn.question.as_str();
        let outcome = match (config.rewrite, rewriter) {
            (RewriteMode::None { h }, _) => rewrite_none(&state, question, h),
            (RewriteMode::Oracle, _) => rewrite_oracle(turn).map_err(|source| PipelineError::Rewrite {
                conversation_no: conv.conversation_no.clone(),
                source,
            })?,
            (RewriteMode::External { source }, Some(svc)) => {
                let history = compose_history(&state, source, question, config.rewrite_budget)
                    .map_err(|e| budget_err(turn.turn_no, e))?;
                rewrite_external(svc, &history, question)
            }
            (RewriteMode::External { .. }, None) => {
                return Err(PipelineError::MissingService("external rewrite"))
            }
        };

        let ranking = collection
            .index
            .search(&config.bm25, &outcome.retrieval_query, config.top_k);
        let ranked_texts = ranking
            .iter()
            .map(|r| (r.id(), collection.text(r.id()).unwrap_or_default()));
        let ctx = assemble_context(
            &outcome.rewrite,
            ranked_texts,
            config.generate_budget,
            config.used_fraction,
        )
        .map_err(|e| budget_err(turn.turn_no, e))?;

        let (answer, gen_fallback) = match generator {
            Some(svc) => {
                let g = generate_external(svc, &outcome.rewrite, &ctx.context);
                (g.answer, g.fallback)
            }
            None => (extractive_answer(&outcome.rewrite, &ctx.included_texts), None),
        };

        let is_transport = |f: &Option<Fallback>| matches!(f, Some(Fallback::ServiceFailure(_)));
        records.push(RunRecord {
            conversation_no: conv.conversation_no.clone(),
            turn_no: turn.turn_no,
            model_rewrite: outcome.rewrite.clone(),
            retrieval_query: outcome.retrieval_query,
            retrieved: ranking,
            context: ctx.context,
            passages_used: ctx.passages_used,
            model_answer: answer.clone(),
            rewrite_fallback: outcome.fallback.is_some(),
            generate_fallback: gen_fallback.is_some(),
            transport_failure: is_transport(&outcome.fallback) || is_transport(&gen_fallback),
        });
        state.push(turn.question.clone(), outcome.rewrite, answer);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Turn;
    use crate::error::ServiceError;
    use alloc::string::ToString;
    use alloc::vec;
    use core::cell::RefCell;

    fn collection() -> IndexedCollection {
        IndexedCollection::build(
            [
                ("p1", "Ryan Dunn died in a car crash in West Goshen. He was 34."),
                ("p2", "Michael Dunn was convicted in Florida."),
                ("p3", "Porsche builds sports cars."),
            ]
            .iter()
            .map(|(id, text)| Passage {
                id: id.to_string(),
                text: text.to_string(),
            }),
        )
        .unwrap()
    }

    fn conversation() -> Conversation {
        Conversation {
            conversation_no: "c1".into(),
            turns: vec![
                Turn {
                    turn_no: 1,
                    question: "How did Ryan Dunn die?".into(),
                    truth_answer: Some("In a car crash.".into()),
                    truth_rewrite: Some("How did Ryan Dunn die?".into()),
                    gold_passage_ids: Some(vec!["p1".into()]),
                },
                Turn {
                    turn_no: 2,
                    question: "Where was it?".into(),
                    truth_answer: Some("West Goshen.".into()),
                    truth_rewrite: Some("Where was Ryan Dunn's car crash?".into()),
                    gold_passage_ids: Some(vec!["p1".into()]),
                },
            ],
        }
    }

    #[test]
    fn oracle_run_uses_truth_rewrites() {
        let cfg = PipelineConfig {
            rewrite: RewriteMode::Oracle,
            ..PipelineConfig::default()
        };
        let recs = run_conversation(&conversation(), &collection(), &cfg, Services::default()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].retrieval_query, "Where was Ryan Dunn's car crash?");
        assert_eq!(recs[1].retrieved[0].id(), "p1");
        for r in &recs {
            r.validate(cfg.top_k).unwrap();
        }
    }

    #[test]
    fn oracle_without_truth_is_an_error() {
        let mut conv = conversation();
        conv.turns[1].truth_rewrite = None;
        let cfg = PipelineConfig {
            rewrite: RewriteMode::Oracle,
            ..PipelineConfig::default()
        };
        assert!(matches!(
            run_conversation(&conv, &collection(), &cfg, Services::default()),
            Err(PipelineError::Rewrite { .. })
        ));
    }

    /// Records what it was asked and echoes the last utterance.
    struct Recorder(RefCell<Vec<Vec<String>>>);

    impl RewriteService for Recorder {
        fn rewrite(&self, utterances: &[String]) -> Result<String, ServiceError> {
            self.0.borrow_mut().push(utterances.to_vec());
            Ok(utterances.last().cloned().unwrap_or_default())
        }
    }

    #[test]
    fn external_rewriter_sees_model_history() {
        let rec = Recorder(RefCell::new(Vec::new()));
        let cfg = PipelineConfig {
            rewrite: RewriteMode::External {
                source: HistorySource::RewritesAndAnswers,
            },
            ..PipelineConfig::default()
        };
        let services = Services {
            rewriter: Some(&rec),
            generator: None,
        };
        let recs = run_conversation(&conversation(), &collection(), &cfg, services).unwrap();
        let calls = rec.0.borrow();
        assert_eq!(calls[0], ["How did Ryan Dunn die?"]);
        assert_eq!(
            calls[1],
            [
                "How did Ryan Dunn die?".to_string(),
                recs[0].model_answer.clone(),
                "Where was it?".to_string()
            ]
        );

        // An echoing rewriter retrieves exactly like no rewriting with h=1.
        let none = run_conversation(
            &conversation(),
            &collection(),
            &PipelineConfig::default(),
            Services::default(),
        )
        .unwrap();
        for (a, b) in recs.iter().zip(&none) {
            assert_eq!(a.retrieved, b.retrieved);
        }
    }

    #[test]
    fn external_mode_needs_a_service() {
        let cfg = PipelineConfig {
            generate: GenerateMode::External,
            ..PipelineConfig::default()
        };
        assert_eq!(
            run_conversation(&conversation(), &collection(), &cfg, Services::default()),
            Err(PipelineError::MissingService("external generate"))
        );
    }

    struct Down;

    impl GenerateService for Down {
        fn generate(&self, _: &str, _: &str) -> Result<String, ServiceError> {
            Err(ServiceError {
                attempts: 3,
                message: "connection refused".into(),
            })
        }
    }

    #[test]
    fn generator_failure_degrades_per_turn() {
        let cfg = PipelineConfig {
            generate: GenerateMode::External,
            ..PipelineConfig::default()
        };
        let services = Services {
            rewriter: None,
            generator: Some(&Down),
        };
        let recs = run_conversation(&conversation(), &collection(), &cfg, services).unwrap();
        assert!(recs.iter().all(|r| r.model_answer.is_empty() && r.transport_failure && r.generate_fallback));
    }
}
