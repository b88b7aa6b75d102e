//! Inverted index with Okapi BM25 ranking.
//!
//! Scoring follows the Lucene variant with a nonnegative idf:
//!
//! ```text
//! idf(t)      = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))
//! score(q, d) = sum over query positions i of
//!               idf(q_i) * (tf(q_i, d) * (k1 + 1)) / (tf(q_i, d) + k1 * (1 - b + b * |d| / avgdl))
//! ```
//!
//! A term repeated in the query contributes once per occurrence. Documents
//! and queries are both tokenized with [`rouge_tokenize`](crate::text::rouge_tokenize).

use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use hashbrown::HashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{Passage, ScoredPassage};
use crate::error::IndexError;
use crate::float;
use crate::text::for_each_rouge_token;

/// Number of passages retrieved per query unless configured otherwise.
pub const DEFAULT_TOP_K: usize = 10;

/// Ranked `(passage id, score)` list, best first. Scores are non-increasing
/// and equal scores are ordered by ascending passage id.
pub type Ranking = Vec<ScoredPassage>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bm25Params {
    /// Term-frequency saturation, `>= 0`.
    pub k1: f64,
    /// Length normalization, in `[0, 1]`.
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.82, b: 0.68 }
    }
}

impl Bm25Params {
    pub fn is_valid(&self) -> bool {
        self.k1.is_finite() && self.k1 >= 0.0 && (0.0..=1.0).contains(&self.b)
    }
}

/// Occurrences of one term in one document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    /// Document ordinal in insertion order.
    pub doc: u32,
    pub tf: u32,
}

/// Inverse document frequency of a term found in `df` of `n_docs` documents.
pub fn idf(n_docs: usize, df: usize) -> f64 {
    let n = n_docs as f64;
    let df = df as f64;
    float::ln(1.0 + (n - df + 0.5) / (df + 0.5))
}

/// Accumulates passages into an index.
#[derive(Debug, Default)]
pub struct IndexBuilder {
    doc_ids: Vec<String>,
    doc_lookup: HashMap<String, u32>,
    doc_len: Vec<u32>,
    term_ids: HashMap<String, u32>,
    terms: Vec<String>,
    postings: Vec<Vec<Posting>>,
    scratch: HashMap<u32, u32>,
}

impl IndexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, passage: &Passage) -> Result<(), IndexError> {
        self.add_text(&passage.id, &passage.text)
    }

    pub fn add_text(&mut self, id: &str, text: &str) -> Result<(), IndexError> {
        if id.is_empty() {
            return Err(IndexError::EmptyPassageId);
        }
        if self.doc_lookup.contains_key(id) {
            return Err(IndexError::DuplicatePassage(id.into()));
        }
        let doc = u32::try_from(self.doc_ids.len()).map_err(|_| IndexError::Overflow)?;

        let mut len: u64 = 0;
        let Self {
            term_ids,
            terms,
            postings,
            scratch,
            ..
        } = self;
        scratch.clear();
        for_each_rouge_token(text, |tok| {
            len += 1;
            let term = match term_ids.get(tok) {
                Some(&t) => t,
                None => {
                    let t = terms.len() as u32;
                    term_ids.insert(tok.into(), t);
                    terms.push(tok.into());
                    postings.push(Vec::new());
                    t
                }
            };
            *scratch.entry(term).or_insert(0) += 1;
        });
        for (&term, &tf) in scratch.iter() {
            postings[term as usize].push(Posting { doc, tf });
        }

        self.doc_len.push(u32::try_from(len).map_err(|_| IndexError::Overflow)?);
        self.doc_lookup.insert(id.into(), doc);
        self.doc_ids.push(id.into());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    /// Freezes the index. Terms are stored in lexicographic order.
    pub fn finish(self) -> Bm25Index {
        let mut order: Vec<u32> = (0..self.terms.len() as u32).collect();
        order.sort_unstable_by(|&a, &b| self.terms[a as usize].cmp(&self.terms[b as usize]));
        let mut terms = Vec::with_capacity(order.len());
        let mut postings = Vec::with_capacity(order.len());
        let mut old_terms: Vec<Option<String>> = self.terms.into_iter().map(Some).collect();
        let mut old_postings: Vec<Option<Vec<Posting>>> =
            self.postings.into_iter().map(Some).collect();
        for t in order {
            terms.push(old_terms[t as usize].take().unwrap_or_default());
            postings.push(old_postings[t as usize].take().unwrap_or_default());
        }
        Bm25Index::assemble(self.doc_ids, self.doc_lookup, self.doc_len, terms, postings)
    }
}

/// Builds an index from a passage stream.
pub fn build_index<I>(passages: I) -> Result<Bm25Index, IndexError>
where
    I: IntoIterator<Item = Passage>,
{
    let mut builder = IndexBuilder::new();
    for p in passages {
        builder.add(&p)?;
    }
    Ok(builder.finish())
}

/// Immutable BM25 index: collection statistics plus postings.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    doc_ids: Vec<String>,
    doc_lookup: HashMap<String, u32>,
    doc_len: Vec<u32>,
    total_len: u64,
    avgdl: f64,
    terms: Vec<String>,
    term_lookup: HashMap<String, u32>,
    postings: Vec<Vec<Posting>>,
}

impl Bm25Index {
    fn assemble(
        doc_ids: Vec<String>,
        doc_lookup: HashMap<String, u32>,
        doc_len: Vec<u32>,
        terms: Vec<String>,
        postings: Vec<Vec<Posting>>,
    ) -> Self {
        let total_len: u64 = doc_len.iter().map(|&l| u64::from(l)).sum();
        let avgdl = if doc_ids.is_empty() {
            0.0
        } else {
            total_len as f64 / doc_ids.len() as f64
        };
        let term_lookup = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            doc_ids,
            doc_lookup,
            doc_len,
            total_len,
            avgdl,
            terms,
            term_lookup,
            postings,
        }
    }

    /// Rebuilds an index from stored parts, checking every structural
    /// invariant: unique non-empty ids, strictly sorted terms, postings sorted
    /// by document with positive tf, and per-document tf sums equal to the
    /// stored document lengths.
    pub fn from_parts(
        doc_ids: Vec<String>,
        doc_len: Vec<u32>,
        terms: Vec<String>,
        postings: Vec<Vec<Posting>>,
    ) -> Result<Self, IndexError> {
        if doc_ids.len() != doc_len.len() || terms.len() != postings.len() {
            return Err(IndexError::Inconsistent("table lengths differ"));
        }
        if doc_ids.len() > u32::MAX as usize {
            return Err(IndexError::Overflow);
        }
        let mut doc_lookup = HashMap::with_capacity(doc_ids.len());
        for (i, id) in doc_ids.iter().enumerate() {
            if id.is_empty() {
                return Err(IndexError::EmptyPassageId);
            }
            if doc_lookup.insert(id.clone(), i as u32).is_some() {
                return Err(IndexError::DuplicatePassage(id.clone()));
            }
        }
        if terms.windows(2).any(|w| w[0] >= w[1]) || terms.iter().any(String::is_empty) {
            return Err(IndexError::Inconsistent("terms not strictly sorted"));
        }
        let mut seen_len = vec![0u64; doc_ids.len()];
        for list in &postings {
            if list.is_empty() || list.windows(2).any(|w| w[0].doc >= w[1].doc) {
                return Err(IndexError::Inconsistent("postings empty or unsorted"));
            }
            for p in list {
                if p.tf == 0 || p.doc as usize >= doc_ids.len() {
                    return Err(IndexError::Inconsistent("bad posting"));
                }
                seen_len[p.doc as usize] += u64::from(p.tf);
            }
        }
        if seen_len
            .iter()
            .zip(&doc_len)
            .any(|(&seen, &len)| seen != u64::from(len))
        {
            return Err(IndexError::Inconsistent("document lengths disagree with postings"));
        }
        Ok(Self::assemble(doc_ids, doc_lookup, doc_len, terms, postings))
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    /// Sum of all document lengths.
    pub fn total_len(&self) -> u64 {
        self.total_len
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    /// Passage ids in insertion order.
    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Document lengths in rouge tokens, by ordinal.
    pub fn doc_lens(&self) -> &[u32] {
        &self.doc_len
    }

    pub fn doc_ordinal(&self, id: &str) -> Option<u32> {
        self.doc_lookup.get(id).copied()
    }

    pub fn doc_len(&self, id: &str) -> Option<u32> {
        self.doc_ordinal(id).map(|d| self.doc_len[d as usize])
    }

    /// Terms in lexicographic order, aligned with [`Self::postings_table`].
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn postings_table(&self) -> &[Vec<Posting>] {
        &self.postings
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.term_lookup
            .get(term)
            .map_or(&[][..], |&t| &self.postings[t as usize])
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn tf(&self, term: &str, id: &str) -> u32 {
        self.doc_ordinal(id)
            .and_then(|d| tf_in(self.postings(term), d))
            .unwrap_or(0)
    }

    fn length_norm(&self, params: &Bm25Params, doc: u32) -> f64 {
        let dl = f64::from(self.doc_len[doc as usize]);
        params.k1 * (1.0 - params.b + params.b * dl / self.avgdl)
    }

    fn weight(&self, params: &Bm25Params, idf: f64, tf: u32, doc: u32) -> f64 {
        let tf = f64::from(tf);
        idf * (tf * (params.k1 + 1.0)) / (tf + self.length_norm(params, doc))
    }

    /// BM25 score of one document for already-tokenized query terms.
    pub fn bm25_score<S: AsRef<str>>(
        &self,
        params: &Bm25Params,
        query_terms: &[S],
        id: &str,
    ) -> Result<f64, IndexError> {
        let doc = self
            .doc_ordinal(id)
            .ok_or_else(|| IndexError::UnknownPassage(id.into()))?;
        let mut score = 0.0;
        for term in query_terms {
            let list = self.postings(term.as_ref());
            if let Some(tf) = tf_in(list, doc) {
                score += self.weight(params, idf(self.n_docs(), list.len()), tf, doc);
            }
        }
        Ok(score)
    }

    /// Top `k` documents with a positive score for `query`.
    pub fn search(&self, params: &Bm25Params, query: &str, k: usize) -> Ranking {
        let mut query_terms: Vec<u32> = Vec::new();
        for_each_rouge_token(query, |tok| {
            if let Some(&t) = self.term_lookup.get(tok) {
                query_terms.push(t);
            }
        });
        if query_terms.is_empty() || k == 0 {
            return Vec::new();
        }

        let n = self.n_docs();
        let mut acc = vec![0.0f64; n];
        let mut touched: Vec<u32> = Vec::new();
        for &t in &query_terms {
            let list = &self.postings[t as usize];
            let idf = idf(n, list.len());
            for p in list {
                let slot = &mut acc[p.doc as usize];
                if *slot == 0.0 {
                    touched.push(p.doc);
                }
                *slot += self.weight(params, idf, p.tf, p.doc);
            }
        }

        let mut heap: BinaryHeap<Candidate<'_>> = BinaryHeap::with_capacity(k + 1);
        for doc in touched {
            let score = acc[doc as usize];
            if score <= 0.0 {
                continue;
            }
            let cand = Candidate {
                score,
                id: &self.doc_ids[doc as usize],
            };
            if heap.len() < k {
                heap.push(cand);
            } else if let Some(worst) = heap.peek() {
                if cand < *worst {
                    heap.pop();
                    heap.push(cand);
                }
            }
        }
        heap.into_sorted_vec()
            .into_iter()
            .map(|c| ScoredPassage(c.id.into(), c.score))
            .collect()
    }
}

fn tf_in(list: &[Posting], doc: u32) -> Option<u32> {
    list.binary_search_by_key(&doc, |p| p.doc)
        .ok()
        .map(|i| list[i].tf)
}

/// Heap entry ordered so that `Less` means "ranks earlier": higher score,
/// then smaller id.
#[derive(Debug)]
struct Candidate<'a> {
    score: f64,
    id: &'a str,
}

impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.id.cmp(other.id))
    }
}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}
