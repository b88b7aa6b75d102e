//! Rewriting, retrieval and generation metrics.
//!
//! ROUGE scores run on [`rouge_tokenize`] tokens without stemming or stopword
//! removal. Token F1 and exact match run on [`squad_normalize`]d text split on
//! whitespace. Under these choices the error-analysis example used as a golden
//! test scores ROUGE1-R 8/9, F1 2/39 and ROUGE-L F1 6/47.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use hashbrown::HashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{Conversation, RunRecord, Turn};
use crate::error::{MetricError, ScoreError};
use crate::text::{rouge_tokenize, squad_normalize};

fn bag<'a, I: IntoIterator<Item = &'a str>>(tokens: I) -> HashMap<&'a str, usize> {
    let mut counts = HashMap::new();
    for t in tokens {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

/// Size of the clipped multiset intersection.
fn overlap(cand: &HashMap<&str, usize>, reference: &HashMap<&str, usize>) -> usize {
    cand.iter()
        .map(|(t, &c)| reference.get(t).map_or(0, |&r| c.min(r)))
        .sum()
}

/// Unigram recall: clipped matches over the reference length.
pub fn rouge1_recall(candidate: &str, reference: &str) -> Result<f64, MetricError> {
    let cand = rouge_tokenize(candidate);
    let reference = rouge_tokenize(reference);
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let matched = overlap(
        &bag(cand.iter().map(String::as_str)),
        &bag(reference.iter().map(String::as_str)),
    );
    Ok(matched as f64 / reference.len() as f64)
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut prev = alloc::vec![0usize; short.len() + 1];
    let mut cur = alloc::vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// ROUGE-L F1 (β = 1): `2·LCS / (|cand| + |ref|)`.
///
/// Zero when exactly one side is empty; one when both are.
pub fn rouge_l_f1(candidate: &str, reference: &str) -> f64 {
    let cand = rouge_tokenize(candidate);
    let reference = rouge_tokenize(reference);
    match (cand.is_empty(), reference.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        (false, false) => {
            let lcs = lcs_len(&cand, &reference);
            2.0 * lcs as f64 / (cand.len() + reference.len()) as f64
        }
    }
}

/// SQuAD token F1 over normalized, whitespace-split answers.
pub fn token_f1(candidate: &str, reference: &str) -> f64 {
    let cand = squad_normalize(candidate);
    let reference = squad_normalize(reference);
    let cand: Vec<&str> = cand.split_whitespace().collect();
    let reference: Vec<&str> = reference.split_whitespace().collect();
    if cand.is_empty() || reference.is_empty() {
        return if cand.is_empty() && reference.is_empty() {
            1.0
        } else {
            0.0
        };
    }
    let common = overlap(&bag(cand.iter().copied()), &bag(reference.iter().copied()));
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / cand.len() as f64;
    let recall = common as f64 / reference.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

pub fn exact_match(candidate: &str, reference: &str) -> bool {
    squad_normalize(candidate) == squad_normalize(reference)
}

/// Reciprocal rank of the first retrieved id found in `gold`.
///
/// `None` when `gold` is empty: the metric is undefined, not zero.
pub fn reciprocal_rank<S: AsRef<str>, G: AsRef<str>>(retrieved: &[S], gold: &[G]) -> Option<f64> {
    if gold.is_empty() {
        return None;
    }
    let hit = retrieved
        .iter()
        .position(|id| gold.iter().any(|g| g.as_ref() == id.as_ref()));
    Some(hit.map_or(0.0, |rank| 1.0 / (rank + 1) as f64))
}

/// Per-turn metric vector. `None` marks a metric whose ground truth is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScores {
    pub conversation_no: String,
    pub turn_no: u32,
    pub rouge1_r: Option<f64>,
    pub mrr: Option<f64>,
    pub f1: Option<f64>,
    pub em: Option<u8>,
    #[serde(rename = "rougeL_f1")]
    pub rouge_l_f1: Option<f64>,
}

impl SampleScores {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Rouge1R => self.rouge1_r,
            Metric::Mrr => self.mrr,
            Metric::F1 => self.f1,
            Metric::Em => self.em.map(f64::from),
            Metric::RougeLF1 => self.rouge_l_f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "rouge1_r")]
    Rouge1R,
    #[serde(rename = "mrr")]
    Mrr,
    #[serde(rename = "f1")]
    F1,
    #[serde(rename = "em")]
    Em,
    #[serde(rename = "rougeL_f1")]
    RougeLF1,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Rouge1R,
        Metric::Mrr,
        Metric::F1,
        Metric::Em,
        Metric::RougeLF1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rouge1R => "rouge1_r",
            Metric::Mrr => "mrr",
            Metric::F1 => "f1",
            Metric::Em => "em",
            Metric::RougeLF1 => "rougeL_f1",
        }
    }

    /// Column header used in the means table.
    pub fn label(self) -> &'static str {
        match self {
            Metric::Rouge1R => "ROUGE1-R",
            Metric::Mrr => "MRR",
            Metric::F1 => "F1",
            Metric::Em => "EM",
            Metric::RougeLF1 => "ROUGEL-F1",
        }
    }
}

/// Scores one turn against its ground truth.
pub fn score_sample(conversation_no: &str, record: &RunRecord, turn: &Turn) -> SampleScores {
    let rouge1_r = turn
        .truth_rewrite
        .as_deref()
        .and_then(|truth| rouge1_recall(&record.model_rewrite, truth).ok());
    let retrieved: Vec<&str> = record.retrieved.iter().map(|r| r.id()).collect();
    let mrr = turn
        .gold_passage_ids
        .as_deref()
        .and_then(|gold| reciprocal_rank(&retrieved, gold));
    let answer = turn.truth_answer.as_deref();
    SampleScores {
        conversation_no: conversation_no.into(),
        turn_no: turn.turn_no,
        rouge1_r,
        mrr,
        f1: answer.map(|a| token_f1(&record.model_answer, a)),
        em: answer.map(|a| u8::from(exact_match(&record.model_answer, a))),
        rouge_l_f1: answer.map(|a| rouge_l_f1(&record.model_answer, a)),
    }
}

/// Mean of one metric over the samples that have it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricMean {
    /// `None` when no sample carries the metric.
    pub mean: Option<f64>,
    pub n: usize,
    pub skipped: usize,
}

impl MetricMean {
    pub fn over<I: IntoIterator<Item = Option<f64>>>(values: I) -> Self {
        let (mut sum, mut n, mut skipped) = (0.0, 0usize, 0usize);
        for v in values {
            match v {
                Some(v) => {
                    sum += v;
                    n += 1;
                }
                None => skipped += 1,
            }
        }
        Self {
            mean: (n > 0).then(|| sum / n as f64),
            n,
            skipped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub samples: Vec<SampleScores>,
    pub means: BTreeMap<Metric, MetricMean>,
}

impl ScoreTable {
    pub fn from_samples(samples: Vec<SampleScores>) -> Self {
        let means = Metric::ALL
            .iter()
            .map(|&m| (m, MetricMean::over(samples.iter().map(|s| s.get(m)))))
            .collect();
        Self { samples, means }
    }

    pub fn mean(&self, metric: Metric) -> Option<f64> {
        self.means.get(&metric).and_then(|m| m.mean)
    }
}

/// Scores every run record against the corpus turn with the same key.
///
/// The run and the corpus must cover exactly the same turns. Samples come
/// out in corpus order.
pub fn score_run(
    records: &[RunRecord],
    conversations: &[Conversation],
) -> Result<ScoreTable, ScoreError> {
    let mut by_key: HashMap<(&str, u32), &RunRecord> = HashMap::with_capacity(records.len());
    for r in records {
        if by_key.insert(r.key(), r).is_some() {
            return Err(ScoreError::DuplicateRecord(r.conversation_no.clone(), r.turn_no));
        }
    }

    let mut samples = Vec::with_capacity(records.len());
    let mut missing = Vec::new();
    for conv in conversations {
        for turn in &conv.turns {
            match by_key.remove(&(conv.conversation_no.as_str(), turn.turn_no)) {
                Some(rec) => samples.push(score_sample(&conv.conversation_no, rec, turn)),
                None => missing.push((conv.conversation_no.clone(), turn.turn_no)),
            }
        }
    }
    if !by_key.is_empty() {
        let mut unknown: Vec<(String, u32)> =
            by_key.keys().map(|&(c, t)| (String::from(c), t)).collect();
        unknown.sort();
        return Err(ScoreError::UnknownTurns(unknown));
    }
    if !missing.is_empty() {
        return Err(ScoreError::MissingTurns(missing));
    }
    Ok(ScoreTable::from_samples(samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRUTH_REWRITE: &str = "What were the circumstances of Ryan Dunn's death?";
    const MODEL_REWRITE: &str = "What were the circumstances of Dunn's death?";
    const TRUTH_ANSWER: &str = "Ryan Dunn's Porsche 911 GT3 veered off the road, struck a tree, \
        and burst into flames in West Goshen Township, Chester County, Pennsylvania.";
    const MODEL_ANSWER: &str = "The Florida Department of Law Enforcement concluded that Dunn's \
        death was a homicide caused by a single gunshot wound to the chest.";

    #[test]
    fn error_example_scores() {
        assert_eq!(rouge1_recall(MODEL_REWRITE, TRUTH_REWRITE).unwrap(), 8.0 / 9.0);
        assert!((token_f1(MODEL_ANSWER, TRUTH_ANSWER) - 2.0 / 39.0).abs() < 1e-12);
        assert!(!exact_match(MODEL_ANSWER, TRUTH_ANSWER));
        assert_eq!(rouge_l_f1(MODEL_ANSWER, TRUTH_ANSWER), 6.0 / 47.0);
    }

    #[test]
    fn rouge1_edges() {
        assert_eq!(rouge1_recall("a b", "a b").unwrap(), 1.0);
        assert_eq!(rouge1_recall("x y", "a b").unwrap(), 0.0);
        assert_eq!(rouge1_recall("a a a", "a b").unwrap(), 0.5);
        assert_eq!(rouge1_recall("a", "?!"), Err(MetricError::EmptyReference));
    }

    #[test]
    fn rouge_l_edges() {
        assert_eq!(rouge_l_f1("a b c", "a c b"), 4.0 / 6.0);
        assert_eq!(rouge_l_f1("same words", "same words"), 1.0);
        assert_eq!(rouge_l_f1("", "a"), 0.0);
        assert_eq!(rouge_l_f1("a", ""), 0.0);
        assert_eq!(rouge_l_f1("", ""), 1.0);
    }

    #[test]
    fn rouge_l_is_order_sensitive_but_bag_metrics_are_not() {
        let (cand, perm, reference) = ("a b c d", "d c b a", "a b c d");
        assert_eq!(rouge1_recall(cand, reference), rouge1_recall(perm, reference));
        assert_eq!(token_f1(cand, reference), token_f1(perm, reference));
        assert_ne!(rouge_l_f1(cand, reference), rouge_l_f1(perm, reference));
    }

    #[test]
    fn f1_and_em_edges() {
        assert_eq!(token_f1("The cat sat", "the cat sat."), 1.0);
        assert_eq!(token_f1("dog", "cat"), 0.0);
        assert_eq!(token_f1("", ""), 1.0);
        assert_eq!(token_f1("the", "cat"), 0.0);
        assert!(exact_match("The cat.", "cat"));
        assert!(exact_match("", ""));
        assert!(!exact_match("cat", "cats"));
    }

    #[test]
    fn reciprocal_rank_cases() {
        let ten: Vec<String> = (0..10).map(|i| alloc::format!("p{i}")).collect();
        assert_eq!(reciprocal_rank(&ten, &["p0"]), Some(1.0));
        assert_eq!(reciprocal_rank(&ten, &["p3"]), Some(0.25));
        assert_eq!(reciprocal_rank(&ten, &["p3", "p7"]), Some(0.25));
        assert_eq!(reciprocal_rank(&ten, &["missing"]), Some(0.0));
        assert_eq!(reciprocal_rank::<_, &str>(&ten, &[]), None);
    }

    #[test]
    fn lcs_small() {
        assert_eq!(lcs_len::<u8>(&[], &[1, 2]), 0);
        assert_eq!(lcs_len(&[1, 2, 3, 4], &[2, 4, 1, 3]), 2);
        assert_eq!(lcs_len(&[1, 3, 4, 1], &[3, 4, 1, 2, 1, 3]), 3);
    }

    #[test]
    fn means_skip_missing() {
        let m = MetricMean::over([Some(1.0), None, Some(0.0)]);
        assert_eq!(m, MetricMean { mean: Some(0.5), n: 2, skipped: 1 });
        let empty = MetricMean::over(core::iter::empty());
        assert_eq!(empty.mean, None);
    }
}
