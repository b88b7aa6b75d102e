//! Conversations, passages and per-turn run records.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::CorpusError;

/// A retrievable text unit. `text` may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub text: String,
}

/// One question of a conversation, with whatever ground truth is available.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub turn_no: u32,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_rewrite: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_passage_ids: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub conversation_no: String,
    pub turns: Vec<Turn>,
}

/// A turn tagged with its conversation, as it appears on one input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnRecord {
    pub conversation_no: String,
    pub turn: Turn,
}

/// Groups turn records into conversations ordered by first appearance, with
/// turns sorted by `turn_no`.
///
/// Rejects duplicate `(conversation_no, turn_no)` keys, empty questions,
/// `turn_no == 0`, and turn numbers that are not contiguous from 1.
pub fn group_turns(records: Vec<TurnRecord>) -> Result<Vec<Conversation>, CorpusError> {
    let mut order: Vec<String> = Vec::new();
    let mut by_conv: BTreeMap<String, Vec<Turn>> = BTreeMap::new();
    for rec in records {
        if rec.turn.question.trim().is_empty() {
            return Err(CorpusError::EmptyQuestion {
                conversation_no: rec.conversation_no,
                turn_no: rec.turn.turn_no,
            });
        }
        let turns = by_conv.entry(rec.conversation_no.clone()).or_insert_with(|| {
            order.push(rec.conversation_no.clone());
            Vec::new()
        });
        turns.push(rec.turn);
    }

    let mut out = Vec::with_capacity(order.len());
    for conversation_no in order {
        let mut turns = by_conv.remove(&conversation_no).unwrap_or_default();
        turns.sort_by_key(|t| t.turn_no);
        for (i, turn) in turns.iter().enumerate() {
            if i > 0 && turns[i - 1].turn_no == turn.turn_no {
                return Err(CorpusError::DuplicateTurn {
                    conversation_no,
                    turn_no: turn.turn_no,
                });
            }
            if turn.turn_no as usize != i + 1 {
                return Err(CorpusError::NonContiguousTurns {
                    conversation_no,
                    turn_no: turn.turn_no,
                });
            }
        }
        out.push(Conversation {
            conversation_no,
            turns,
        });
    }
    Ok(out)
}

/// A retrieved passage id with its BM25 score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPassage(pub String, pub f64);

impl ScoredPassage {
    pub fn id(&self) -> &str {
        &self.0
    }

    pub fn score(&self) -> f64 {
        self.1
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Trace of one pipeline turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub conversation_no: String,
    pub turn_no: u32,
    pub model_rewrite: String,
    pub retrieval_query: String,
    pub retrieved: Vec<ScoredPassage>,
    pub context: String,
    pub passages_used: usize,
    pub model_answer: String,
    /// The rewriter returned nothing usable and the question was used instead.
    #[serde(default, skip_serializing_if = "is_false")]
    pub rewrite_fallback: bool,
    /// The generator returned an empty answer or failed.
    #[serde(default, skip_serializing_if = "is_false")]
    pub generate_fallback: bool,
    /// A model service failed after exhausting its retries.
    #[serde(default, skip_serializing_if = "is_false")]
    pub transport_failure: bool,
}

impl RunRecord {
    pub fn key(&self) -> (&str, u32) {
        (&self.conversation_no, self.turn_no)
    }

    /// Checks the record invariants: scores non-increasing and
    /// `passages_used <= retrieved.len() <= top_k`.
    pub fn validate(&self, top_k: usize) -> Result<(), CorpusError> {
        let bad = |reason: &'static str| CorpusError::InvalidRecord {
            conversation_no: self.conversation_no.clone(),
            turn_no: self.turn_no,
            reason,
        };
        if self.retrieved.len() > top_k {
            return Err(bad("more retrieved passages than top_k"));
        }
        if self.retrieved.windows(2).any(|w| w[0].1 < w[1].1) {
            return Err(bad("retrieved scores increase"));
        }
        if self.passages_used > self.retrieved.len() {
            return Err(bad("passages_used exceeds retrieved"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn rec(conv: &str, turn_no: u32, q: &str) -> TurnRecord {
        TurnRecord {
            conversation_no: conv.to_string(),
            turn: Turn {
                turn_no,
                question: q.to_string(),
                truth_answer: None,
                truth_rewrite: None,
                gold_passage_ids: None,
            },
        }
    }

    #[test]
    fn groups_and_sorts_turns() {
        let convs = group_turns(alloc::vec![
            rec("c1", 2, "second"),
            rec("c2", 1, "other"),
            rec("c1", 1, "first"),
        ])
        .unwrap();
        assert_eq!(convs.len(), 2);
        assert_eq!(convs[0].conversation_no, "c1");
        let nos: Vec<u32> = convs[0].turns.iter().map(|t| t.turn_no).collect();
        assert_eq!(nos, [1, 2]);
        assert_eq!(convs[0].turns[0].question, "first");
    }

    #[test]
    fn rejects_bad_turns() {
        assert!(matches!(
            group_turns(alloc::vec![rec("c", 1, "a"), rec("c", 1, "b")]),
            Err(CorpusError::DuplicateTurn { turn_no: 1, .. })
        ));
        assert!(matches!(
            group_turns(alloc::vec![rec("c", 1, "a"), rec("c", 3, "b")]),
            Err(CorpusError::NonContiguousTurns { turn_no: 3, .. })
        ));
        assert!(matches!(
            group_turns(alloc::vec![rec("c", 1, "  ")]),
            Err(CorpusError::EmptyQuestion { .. })
        ));
        assert!(group_turns(Vec::new()).unwrap().is_empty());
    }

    #[test]
    fn record_validation() {
        let mut r = RunRecord {
            conversation_no: "c".into(),
            turn_no: 1,
            model_rewrite: "q".into(),
            retrieval_query: "q".into(),
            retrieved: alloc::vec![ScoredPassage("a".into(), 2.0), ScoredPassage("b".into(), 1.0)],
            context: "q".into(),
            passages_used: 2,
            model_answer: String::new(),
            rewrite_fallback: false,
            generate_fallback: false,
            transport_failure: false,
        };
        assert!(r.validate(10).is_ok());
        assert!(r.validate(1).is_err());
        r.passages_used = 3;
        assert!(r.validate(10).is_err());
        r.passages_used = 0;
        r.retrieved.reverse();
        assert!(r.validate(10).is_err());
    }
}
