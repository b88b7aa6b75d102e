//! On-disk index snapshot.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes   "CQAIDX1\n"
//! n_docs     u32
//! n_docs x   id_len u32, id bytes (UTF-8), doc_len u32, text_len u64, text bytes (UTF-8)
//! n_terms    u32
//! n_terms x  term_len u32, term bytes (UTF-8), n_postings u32,
//!            n_postings x (doc u32, tf u32)
//! ```
//!
//! Documents appear in insertion order, terms in byte-lexicographic order and
//! postings in ascending document order, so an unchanged collection always
//! produces identical bytes. The reader rejects trailing bytes and checks
//! every index invariant before returning.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use convqa_core::index::{Bm25Index, Posting};
use convqa_core::IndexedCollection;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CQAIDX1\n";

/// Serializes a collection to snapshot bytes.
pub fn encode(collection: &IndexedCollection) -> Vec<u8> {
    let index = &collection.index;
    let mut out = Vec::with_capacity(64 + index.total_len() as usize * 12);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, index.n_docs() as u32);
    for ((id, &len), text) in index.doc_ids().iter().zip(index.doc_lens()).zip(&collection.texts) {
        put_str32(&mut out, id);
        put_u32(&mut out, len);
        out.extend_from_slice(&(text.len() as u64).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
    }
    put_u32(&mut out, index.vocabulary_size() as u32);
    for (term, list) in index.terms().iter().zip(index.postings_table()) {
        put_str32(&mut out, term);
        put_u32(&mut out, list.len() as u32);
        for p in list {
            put_u32(&mut out, p.doc);
            put_u32(&mut out, p.tf);
        }
    }
    out
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str32(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self, len: usize) -> Result<String, String> {
        let at = self.pos;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| format!("invalid UTF-8 at byte {at}"))
    }

    /// Guards preallocation against corrupt counts.
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Parses snapshot bytes.
pub fn decode(bytes: &[u8]) -> Result<IndexedCollection, String> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err("not an index snapshot (bad magic)".into());
    }
    let mut cur = Cursor {
        buf: bytes,
        pos: MAGIC.len(),
    };
    let n_docs = cur.u32()? as usize;
    let mut doc_ids = Vec::with_capacity(n_docs.min(cur.remaining() / 16));
    let mut doc_len = Vec::with_capacity(doc_ids.capacity());
    let mut texts = Vec::with_capacity(doc_ids.capacity());
    for _ in 0..n_docs {
        let id_len = cur.u32()? as usize;
        doc_ids.push(cur.string(id_len)?);
        doc_len.push(cur.u32()?);
        let text_len = usize::try_from(cur.u64()?).map_err(|_| "text too large".to_string())?;
        texts.push(cur.string(text_len)?);
    }
    let n_terms = cur.u32()? as usize;
    let mut terms = Vec::with_capacity(n_terms.min(cur.remaining() / 12));
    let mut postings = Vec::with_capacity(terms.capacity());
    for _ in 0..n_terms {
        let term_len = cur.u32()? as usize;
        terms.push(cur.string(term_len)?);
        let n = cur.u32()? as usize;
        let mut list = Vec::with_capacity(n.min(cur.remaining() / 8));
        for _ in 0..n {
            list.push(Posting {
                doc: cur.u32()?,
                tf: cur.u32()?,
            });
        }
        postings.push(list);
    }
    if cur.remaining() != 0 {
        return Err(format!("{} trailing bytes", cur.remaining()));
    }
    let index = Bm25Index::from_parts(doc_ids, doc_len, terms, postings).map_err(|e| e.to_string())?;
    Ok(IndexedCollection { index, texts })
}

pub fn write(path: impl AsRef<Path>, collection: &IndexedCollection) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    out.write_all(&encode(collection))
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read(path: impl AsRef<Path>) -> Result<IndexedCollection> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|reason| Error::Snapshot {
        path: path.into(),
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use convqa_core::{Bm25Params, Passage};

    fn sample() -> IndexedCollection {
        IndexedCollection::build(
            [("p1", "a a b"), ("p2", "b c"), ("p3", "")]
                .iter()
                .map(|(id, t)| Passage {
                    id: id.to_string(),
                    text: t.to_string(),
                }),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_preserves_search() {
        let c = sample();
        let bytes = encode(&c);
        assert_eq!(&bytes[..8], b"CQAIDX1\n");
        let back = decode(&bytes).unwrap();
        assert_eq!(back.texts, c.texts);
        assert_eq!(back.index.doc_ids(), c.index.doc_ids());
        let p = Bm25Params::default();
        assert_eq!(back.index.search(&p, "a b", 10), c.index.search(&p, "a b", 10));
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn empty_collection() {
        let c = IndexedCollection::build(Vec::new()).unwrap();
        let bytes = encode(&c);
        assert_eq!(bytes.len(), 16);
        assert_eq!(decode(&bytes).unwrap().index.n_docs(), 0);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = encode(&sample());
        assert!(decode(b"NOTANIDX").is_err());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(decode(&trailing).is_err());
        // Flip the first document length.
        let mut bad = bytes.clone();
        let len_at = 8 + 4 + 4 + 2;
        bad[len_at] ^= 1;
        assert!(decode(&bad).unwrap_err().contains("lengths"));
    }
}
