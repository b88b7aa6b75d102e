//! Generator input assembly and answer generation.

use alloc::string::String;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::error::{BudgetError, ServiceError};
use crate::rewrite::Fallback;
use crate::text::{budget_tokens, prefix_end, rouge_tokenize};

/// Default share of a passage's tokens that must reach the generator for the
/// passage to count as used.
pub const DEFAULT_USED_FRACTION: f64 = 0.5;

/// Generator input: the rewrite followed by ranked passages, one per line,
/// cut to the token budget.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledContext {
    pub context: String,
    /// Passages with at least the configured fraction of their tokens included.
    pub passages_used: usize,
    /// Passages with any part in `context`, in rank order.
    pub included_ids: Vec<String>,
    /// The included text of each entry of `included_ids`; the last one may be
    /// a prefix of the full passage.
    pub included_texts: Vec<String>,
}

/// Lays out `rewrite` then each passage in rank order, separated by
/// newlines. The first passage that overflows `budget` is cut at a token
/// boundary so the context fills the budget exactly; later passages are
/// dropped.
pub fn assemble_context<I, S>(
    rewrite: &str,
    ranked_texts: I,
    budget: usize,
    used_fraction: f64,
) -> Result<AssembledContext, BudgetError>
where
    I: IntoIterator<Item = (S, S)>,
    S: AsRef<str>,
{
    let required = budget_tokens(rewrite);
    if required > budget {
        return Err(BudgetError { budget, required });
    }
    let mut remaining = budget - required;
    let mut out = AssembledContext {
        context: String::from(rewrite),
        passages_used: 0,
        included_ids: Vec::new(),
        included_texts: Vec::new(),
    };
    for (id, text) in ranked_texts {
        let text = text.as_ref();
        let total = budget_tokens(text);
        let (piece, taken) = if total <= remaining {
            (text, total)
        } else if remaining > 0 {
            (&text[..prefix_end(text, remaining)], remaining)
        } else {
            break;
        };
        out.context.push('\n');
        out.context.push_str(piece);
        out.included_ids.push(String::from(id.as_ref()));
        out.included_texts.push(String::from(piece));
        if taken as f64 >= used_fraction * total as f64 {
            out.passages_used += 1;
        }
        remaining -= taken;
        if taken < total {
            break;
        }
    }
    Ok(out)
}

/// Splits after `.`, `!` or `?` when followed by whitespace or the end of
/// the text. Sentences are trimmed and never empty.
///
/// Abbreviations are not special-cased: `"e.g. test"` yields `["e.g.", "test"]`.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let boundary = chars.peek().is_none_or(|&(_, next)| next.is_whitespace());
            if boundary {
                let end = i + c.len_utf8();
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
            }
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest);
    }
    out
}

/// Extractive baseline: the sentence of `passages` with the highest token F1
/// (rouge tokens) against `rewrite`. Ties go to the earlier passage, then the
/// earlier sentence. Returns an empty string when there is no sentence.
pub fn extractive_answer<S: AsRef<str>>(rewrite: &str, passages: &[S]) -> String {
    let query = rouge_tokenize(rewrite);
    let mut query_counts: HashMap<&str, usize> = HashMap::new();
    for t in &query {
        *query_counts.entry(t.as_str()).or_insert(0) += 1;
    }

    let mut best: Option<(f64, &str)> = None;
    for passage in passages {
        for sentence in split_sentences(passage.as_ref()) {
            let tokens = rouge_tokenize(sentence);
            let f1 = if tokens.is_empty() || query.is_empty() {
                0.0
            } else {
                let mut remaining = query_counts.clone();
                let mut common = 0usize;
                for t in &tokens {
                    if let Some(c) = remaining.get_mut(t.as_str()) {
                        if *c > 0 {
                            *c -= 1;
                            common += 1;
                        }
                    }
                }
                2.0 * common as f64 / (tokens.len() + query.len()) as f64
            };
            if best.is_none_or(|(score, _)| f1 > score) {
                best = Some((f1, sentence));
            }
        }
    }
    best.map(|(_, s)| String::from(s)).unwrap_or_default()
}

/// An answer-generation model reachable through the `/generate` protocol.
pub trait GenerateService {
    fn generate(&self, question: &str, context: &str) -> Result<String, ServiceError>;
}

impl<T: GenerateService + ?Sized> GenerateService for &T {
    fn generate(&self, question: &str, context: &str) -> Result<String, ServiceError> {
        (**self).generate(question, context)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedAnswer {
    pub answer: String,
    pub fallback: Option<Fallback>,
}

/// Delegates to an external generator. An empty response or a failure yields
/// an empty answer with the reason recorded.
pub fn generate_external<G: GenerateService + ?Sized>(
    service: &G,
    rewrite: &str,
    context: &str,
) -> GeneratedAnswer {
    match service.generate(rewrite, context) {
        Ok(answer) if !answer.is_empty() => GeneratedAnswer {
            answer,
            fallback: None,
        },
        Ok(_) => GeneratedAnswer {
            answer: String::new(),
            fallback: Some(Fallback::EmptyResponse),
        },
        Err(e) => GeneratedAnswer {
            answer: String::new(),
            fallback: Some(Fallback::ServiceFailure(e)),
        },
    }
}
