//! Tokenization and normalization shared by the index, the metrics and
//! budget accounting.
//!
//! Three distinct views of a string are used across the crate:
//!
//! - [`rouge_tokenize`]: lowercase, split on every non-alphanumeric character.
//!   Used for indexing, querying and the ROUGE metrics, so `"Dunn's"` becomes
//!   `["dunn", "s"]`.
//! - [`squad_normalize`]: lowercase, delete punctuation in place, drop the
//!   articles `a`/`an`/`the`, collapse whitespace. Used for token F1 and exact
//!   match, so `"Dunn's"` becomes `"dunns"`.
//! - [`budget_tokens`]: whitespace chunks, the unit of every token budget.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Deref;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

/// Default input budget of the downstream models, in budget tokens.
pub const DEFAULT_BUDGET: usize = 1024;

/// Lowercase alphanumeric tokens produced by [`rouge_tokenize`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    /// Joins the tokens with single spaces.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a String;
    type IntoIter = core::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Lowercases `text` and splits it on maximal runs of non-alphanumeric
/// characters, dropping empty pieces.
pub fn rouge_tokenize(text: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    for_each_rouge_token(text, |tok| tokens.push(String::from(tok)));
    TokenSeq(tokens)
}

/// Visits the rouge tokens of `text` without collecting them.
///
/// The callback receives a lowercased token in a scratch buffer that is
/// reused between calls.
pub fn for_each_rouge_token(text: &str, mut f: impl FnMut(&str)) {
    let mut buf = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            if c.is_ascii() {
                buf.push(c.to_ascii_lowercase());
            } else {
                // Some lowercase mappings produce non-alphanumeric marks
                // (e.g. 'İ' -> "i\u{307}"); those act as separators.
                for lc in c.to_lowercase() {
                    if lc.is_alphanumeric() {
                        buf.push(lc);
                    } else if !buf.is_empty() {
                        f(&buf);
                        buf.clear();
                    }
                }
            }
        } else if !buf.is_empty() {
            f(&buf);
            buf.clear();
        }
    }
    if !buf.is_empty() {
        f(&buf);
    }
}

fn is_punctuation(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_punctuation();
    }
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_article(word: &str) -> bool {
    matches!(word, "a" | "an" | "the")
}

/// SQuAD answer normalization: lowercase, delete punctuation, remove the
/// articles `a`, `an` and `the` as whole words, collapse whitespace.
///
/// Punctuation is the ASCII punctuation set plus every Unicode `P*`
/// character. Deletion happens in place, so `"Dunn's"` normalizes to
/// `"dunns"`.
pub fn squad_normalize(text: &str) -> String {
    let lowered: String = text
        .to_lowercase()
        .chars()
        .filter(|&c| !is_punctuation(c))
        .collect();

    // Replace article words bounded by non-word characters with a space,
    // mirroring `\b(a|an|the)\b`.
    let mut spaced = String::with_capacity(lowered.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        if is_article(word) {
            out.push(' ');
        } else {
            out.push_str(word);
        }
        word.clear();
    };
    for c in lowered.chars() {
        if is_word_char(c) {
            word.push(c);
        } else {
            flush(&mut word, &mut spaced);
            spaced.push(c);
        }
    }
    flush(&mut word, &mut spaced);

    let mut out = String::with_capacity(spaced.len());
    for chunk in spaced.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(chunk);
    }
    out
}

/// Number of whitespace-delimited chunks in `text`.
pub fn budget_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Byte offset just past the `n`-th whitespace chunk of `text`.
///
/// Returns `0` for `n == 0` and `text.len()` when `text` has at most `n`
/// chunks (trailing whitespace excluded).
pub(crate) fn prefix_end(text: &str, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let mut seen = 0;
    let mut in_chunk = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if in_chunk {
                in_chunk = false;
                seen += 1;
                if seen == n {
                    return i;
                }
            }
        } else {
            in_chunk = true;
        }
    }
    text.trim_end().len()
}
