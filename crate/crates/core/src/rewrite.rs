//! Conversation history and question rewriting strategies.
//!
//! History windows count individual utterances: a question and an answer are
//! two entries. The current question is always the last utterance.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Turn;
use crate::error::{BudgetError, RewriteError, ServiceError};
use crate::text::budget_tokens;

/// Which earlier utterances are fed to the rewriter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HistorySource {
    /// Original questions.
    #[serde(rename = "q")]
    Questions,
    /// Original questions interleaved with model answers.
    #[serde(rename = "q_ma")]
    QuestionsAndAnswers,
    /// Model rewrites of earlier questions.
    #[serde(rename = "mr")]
    Rewrites,
    /// Model rewrites interleaved with model answers.
    #[serde(rename = "mr_ma")]
    RewritesAndAnswers,
}

impl HistorySource {
    pub const ALL: [HistorySource; 4] = [
        HistorySource::Questions,
        HistorySource::QuestionsAndAnswers,
        HistorySource::Rewrites,
        HistorySource::RewritesAndAnswers,
    ];

    pub fn key(self) -> &'static str {
        match self {
            HistorySource::Questions => "q",
            HistorySource::QuestionsAndAnswers => "q_ma",
            HistorySource::Rewrites => "mr",
            HistorySource::RewritesAndAnswers => "mr_ma",
        }
    }
}

impl fmt::Display for HistorySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for HistorySource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HistorySource::ALL
            .into_iter()
            .find(|h| h.key() == s)
            .ok_or_else(|| alloc::format!("unknown history source {s:?}"))
    }
}

/// A completed turn as the pipeline saw it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryEntry {
    pub question: String,
    pub rewrite: String,
    pub answer: String,
}

/// Completed turns of one conversation, oldest first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConversationState {
    entries: Vec<HistoryEntry>,
}

impl ConversationState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a finished turn.
    pub fn push(&mut self, question: String, rewrite: String, answer: String) {
        self.entries.push(HistoryEntry {
            question,
            rewrite,
            answer,
        });
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Earlier utterances for `source`, oldest first.
    pub fn utterances(&self, source: HistorySource) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.entries.len() * 2);
        for e in &self.entries {
            match source {
                HistorySource::Questions => out.push(e.question.as_str()),
                HistorySource::QuestionsAndAnswers => {
                    out.push(&e.question);
                    out.push(&e.answer);
                }
                HistorySource::Rewrites => out.push(&e.rewrite),
                HistorySource::RewritesAndAnswers => {
                    out.push(&e.rewrite);
                    out.push(&e.answer);
                }
            }
        }
        out
    }
}

/// Rewriter input for the current `question`: the most recent utterances of
/// `source` that fit in `budget` tokens together with the question, which is
/// always last. Older utterances are dropped first.
pub fn compose_history(
    state: &ConversationState,
    source: HistorySource,
    question: &str,
    budget: usize,
) -> Result<Vec<String>, BudgetError> {
    let required = budget_tokens(question);
    if required > budget {
        return Err(BudgetError { budget, required });
    }
    let mut used = required;
    let mut kept: Vec<&str> = Vec::new();
    for utt in state.utterances(source).into_iter().rev() {
        let cost = budget_tokens(utt);
        if used + cost > budget {
            break;
        }
        used += cost;
        kept.push(utt);
    }
    let mut out: Vec<String> = kept.into_iter().rev().map(String::from).collect();
    out.push(question.into());
    Ok(out)
}

/// Why an external rewrite or answer was replaced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fallback {
    /// The service answered with an empty string.
    EmptyResponse,
    /// The service could not be reached after its retries.
    ServiceFailure(ServiceError),
}

/// What gets scored as the rewrite and what gets sent to retrieval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteOutcome {
    pub rewrite: String,
    pub retrieval_query: String,
    pub fallback: Option<Fallback>,
}

impl RewriteOutcome {
    fn same(text: String) -> Self {
        Self {
            retrieval_query: text.clone(),
            rewrite: text,
            fallback: None,
        }
    }
}

/// No rewriting: the question is scored as-is while retrieval uses the last
/// `h` utterances of the question/model-answer interleaving, current question
/// included, joined by spaces. `h == 0` is treated as 1.
pub fn rewrite_none(state: &ConversationState, question: &str, h: usize) -> RewriteOutcome {
    let mut window = state.utterances(HistorySource::QuestionsAndAnswers);
    window.push(question);
    let start = window.len().saturating_sub(h.max(1));
    RewriteOutcome {
        rewrite: question.into(),
        retrieval_query: window[start..].join(" "),
        fallback: None,
    }
}

/// Uses the gold rewrite for both scoring and retrieval.
pub fn rewrite_oracle(turn: &Turn) -> Result<RewriteOutcome, RewriteError> {
    turn.truth_rewrite
        .clone()
        .map(RewriteOutcome::same)
        .ok_or(RewriteError::MissingTruthRewrite {
            turn_no: turn.turn_no,
        })
}

/// A question-rewriting model reachable through the `/rewrite` protocol.
pub trait RewriteService {
    fn rewrite(&self, utterances: &[String]) -> Result<String, ServiceError>;
}

impl<T: RewriteService + ?Sized> RewriteService for &T {
    fn rewrite(&self, utterances: &[String]) -> Result<String, ServiceError> {
        (**self).rewrite(utterances)
    }
}

/// Delegates to an external rewriter. `history` must end with `question`.
///
/// The response is trimmed. An empty response or a service failure falls back
/// to the original question and records why.
pub fn rewrite_external<S: RewriteService + ?Sized>(
    service: &S,
    history: &[String],
    question: &str,
) -> RewriteOutcome {
    let (text, fallback) = match service.rewrite(history) {
        Ok(resp) if !resp.trim().is_empty() => (String::from(resp.trim()), None),
        Ok(_) => (String::from(question), Some(Fallback::EmptyResponse)),
        Err(e) => (String::from(question), Some(Fallback::ServiceFailure(e))),
    };
    RewriteOutcome {
        fallback,
        ..RewriteOutcome::same(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn state(turns: &[(&str, &str, &str)]) -> ConversationState {
        let mut s = ConversationState::new();
        for (q, r, a) in turns {
            s.push(q.to_string(), r.to_string(), a.to_string());
        }
        s
    }

    #[test]
    fn first_turn_is_question_only() {
        let s = ConversationState::new();
        for src in HistorySource::ALL {
            assert_eq!(compose_history(&s, src, "q1?", 1024).unwrap(), vec!["q1?"]);
        }
    }

    #[test]
    fn sources_select_utterances() {
        let s = state(&[("q1", "mr1", "ma1")]);
        let h = |src| compose_history(&s, src, "q2", 1024).unwrap();
        assert_eq!(h(HistorySource::RewritesAndAnswers), ["mr1", "ma1", "q2"]);
        assert_eq!(h(HistorySource::Rewrites), ["mr1", "q2"]);
        assert_eq!(h(HistorySource::QuestionsAndAnswers), ["q1", "ma1", "q2"]);
        assert_eq!(h(HistorySource::Questions), ["q1", "q2"]);
    }

    #[test]
    fn truncates_oldest_first() {
        let s = state(&[
            ("one a", "r1", "ans one"),
            ("two b", "r2", "ans two"),
            ("three c", "r3", "ans three"),
        ]);
        // question: 2 tokens, each prior utterance: 2 tokens
        let h = compose_history(&s, HistorySource::QuestionsAndAnswers, "now what", 6).unwrap();
        assert_eq!(h, ["three c", "ans three", "now what"]);
        let h = compose_history(&s, HistorySource::QuestionsAndAnswers, "now what", 7).unwrap();
        assert_eq!(h, ["three c", "ans three", "now what"]);
        let h = compose_history(&s, HistorySource::QuestionsAndAnswers, "now what", 2).unwrap();
        assert_eq!(h, ["now what"]);
        assert_eq!(
            compose_history(&s, HistorySource::Questions, "now what", 1),
            Err(BudgetError { budget: 1, required: 2 })
        );
    }

    #[test]
    fn truncation_stops_at_first_overflow() {
        // A long middle utterance blocks older short ones from being kept.
        let s = state(&[("a", "r", "b"), ("x y z w v", "r", "c")]);
        let h = compose_history(&s, HistorySource::QuestionsAndAnswers, "q", 4).unwrap();
        assert_eq!(h, ["c", "q"]);
    }

    #[test]
    fn no_rewriting_windows() {
        let s = state(&[("q1", "r1", "a1"), ("q2", "r2", "a2")]);
        let one = rewrite_none(&s, "q3", 1);
        assert_eq!(one.rewrite, "q3");
        assert_eq!(one.retrieval_query, "q3");
        let seven = rewrite_none(&s, "q3", 7);
        assert_eq!(seven.rewrite, "q3");
        assert_eq!(seven.retrieval_query, "q1 a1 q2 a2 q3");
        assert_eq!(rewrite_none(&s, "q3", 2).retrieval_query, "a2 q3");
        assert_eq!(rewrite_none(&s, "q3", 0).retrieval_query, "q3");
    }

    #[test]
    fn oracle_requires_truth() {
        let mut turn = Turn {
            turn_no: 2,
            question: "What were the circumstances?".into(),
            truth_answer: None,
            truth_rewrite: Some("What were the circumstances of Ryan Dunn's death?".into()),
            gold_passage_ids: None,
        };
        let out = rewrite_oracle(&turn).unwrap();
        assert_eq!(out.rewrite, "What were the circumstances of Ryan Dunn's death?");
        assert_eq!(out.retrieval_query, out.rewrite);
        turn.truth_rewrite = None;
        assert_eq!(
            rewrite_oracle(&turn),
            Err(RewriteError::MissingTruthRewrite { turn_no: 2 })
        );
    }

    struct Fixed(Result<&'static str, ServiceError>);

    impl RewriteService for Fixed {
        fn rewrite(&self, _: &[String]) -> Result<String, ServiceError> {
            self.0.clone().map(String::from)
        }
    }

    struct Echo;

    impl RewriteService for Echo {
        fn rewrite(&self, utterances: &[String]) -> Result<String, ServiceError> {
            Ok(utterances.last().cloned().unwrap_or_default())
        }
    }

    #[test]
    fn external_outcomes() {
        let hist = vec!["When was Dunn's death?".to_string(), "What were the circumstances?".to_string()];
        let q = "What were the circumstances?";
        let echo = rewrite_external(&Echo, &hist, q);
        assert_eq!(echo.rewrite, q);
        assert_eq!(echo.fallback, None);

        let model = rewrite_external(
            &Fixed(Ok("  What were the circumstances of Dunn's death?\n")),
            &hist,
            q,
        );
        assert_eq!(model.rewrite, "What were the circumstances of Dunn's death?");
        assert_eq!(model.retrieval_query, model.rewrite);

        let empty = rewrite_external(&Fixed(Ok("   ")), &hist, q);
        assert_eq!(empty.rewrite, q);
        assert_eq!(empty.fallback, Some(Fallback::EmptyResponse));

        let err = ServiceError { attempts: 3, message: "down".into() };
        let failed = rewrite_external(&Fixed(Err(err.clone())), &hist, q);
        assert_eq!(failed.retrieval_query, q);
        assert_eq!(failed.fallback, Some(Fallback::ServiceFailure(err)));
    }

    #[test]
    fn history_source_keys_round_trip() {
        for src in HistorySource::ALL {
            assert_eq!(src.key().parse::<HistorySource>(), Ok(src));
        }
        assert!("bogus".parse::<HistorySource>().is_err());
    }
}
