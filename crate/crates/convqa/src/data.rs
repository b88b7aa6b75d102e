//! JSONL files: conversations, passages, run records and score tables.
//!
//! Every file holds one JSON object per line. Outputs written by the CLI
//! start with a `{"header": {...}}` line; readers skip it.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Lines, Write};
use std::path::{Path, PathBuf};

use convqa_core::corpus::{group_turns, TurnRecord};
use convqa_core::{Conversation, Passage, RunRecord, SampleScores, Turn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Provenance written as the first line (or key) of every CLI output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub artifact: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
}

impl Header {
    pub fn new(command: &str, config_hash: &str) -> Self {
        Self {
            artifact: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config_hash.into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: Header,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Conversation numbers arrive as strings or integers.
#[derive(Deserialize)]
#[serde(untagged)]
enum Key {
    Text(String),
    Int(i64),
}

impl From<Key> for String {
    fn from(k: Key) -> Self {
        match k {
            Key::Text(s) => s,
            Key::Int(i) => i.to_string(),
        }
    }
}

/// One input line. Shared-task field names are accepted as aliases.
#[derive(Deserialize)]
struct TurnLine {
    #[serde(alias = "Conversation_no")]
    conversation_no: Key,
    #[serde(alias = "Turn_no")]
    turn_no: u32,
    #[serde(alias = "Question")]
    question: String,
    #[serde(default, alias = "Truth_answer")]
    truth_answer: Option<String>,
    #[serde(default, alias = "Truth_rewrite")]
    truth_rewrite: Option<String>,
    #[serde(default, alias = "Truth_passages")]
    gold_passage_ids: Option<Vec<String>>,
}

#[derive(Serialize)]
struct TurnLineOut<'a> {
    conversation_no: &'a str,
    #[serde(flatten)]
    turn: &'a Turn,
}

/// Reads conversations grouped by `conversation_no` (first-appearance
/// order) with turns sorted by `turn_no`. Unknown fields are ignored.
pub fn load_conversations(path: impl AsRef<Path>) -> Result<Vec<Conversation>> {
    let path = path.as_ref();
    parse_conversations(open(path)?, path)
}

pub fn parse_conversations(reader: impl BufRead, path: &Path) -> Result<Vec<Conversation>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TurnLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if parsed.turn_no == 0 {
            return Err(Error::Parse {
                path: path.into(),
                line: i + 1,
                message: "turn_no must be positive".into(),
            });
        }
        records.push(TurnRecord {
            conversation_no: parsed.conversation_no.into(),
            turn: Turn {
                turn_no: parsed.turn_no,
                question: parsed.question,
                truth_answer: parsed.truth_answer,
                truth_rewrite: parsed.truth_rewrite,
                gold_passage_ids: parsed.gold_passage_ids,
            },
        });
    }
    group_turns(records).map_err(|source| Error::Corpus {
        path: path.into(),
        source,
    })
}

pub fn write_conversations(path: impl AsRef<Path>, conversations: &[Conversation]) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    for conv in conversations {
        for turn in &conv.turns {
            let line = TurnLineOut {
                conversation_no: &conv.conversation_no,
                turn,
            };
            write_line(&mut out, path, &line)?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Streaming passage reader; rejects missing, empty and duplicate ids.
pub struct PassageReader<R> {
    path: PathBuf,
    lines: Lines<R>,
    line_no: usize,
    seen: HashSet<String>,
}

impl<R: BufRead> Iterator for PassageReader<R> {
    type Item = Result<Passage>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: self.path.clone(),
                line: self.line_no,
                message,
            };
            let passage: Passage = match serde_json::from_str(&line) {
                Ok(p) => p,
                Err(e) => return Some(Err(err(e.to_string()))),
            };
            if passage.id.is_empty() {
                return Some(Err(err("empty passage id".into())));
            }
            if !self.seen.insert(passage.id.clone()) {
                return Some(Err(Error::DuplicatePassage {
                    path: self.path.clone(),
                    line: self.line_no,
                    id: passage.id,
                }));
            }
            return Some(Ok(passage));
        }
    }
}

pub fn load_passages(path: impl AsRef<Path>) -> Result<PassageReader<BufReader<File>>> {
    let path = path.as_ref();
    Ok(passage_reader(open(path)?, path))
}

pub fn passage_reader<R: BufRead>(reader: R, path: &Path) -> PassageReader<R> {
    PassageReader {
        path: path.into(),
        lines: reader.lines(),
        line_no: 0,
        seen: HashSet::new(),
    }
}

pub fn write_passages<'a>(
    path: impl AsRef<Path>,
    passages: impl IntoIterator<Item = &'a Passage>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    for p in passages {
        write_line(&mut out, path, p)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_line<T: Serialize>(out: &mut impl Write, path: &Path, item: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, item)
        .map_err(|e| Error::io(path, io::Error::other(e)))?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))
}

/// Writes `items` one per line, preceded by `header` when given.
pub fn write_jsonl<T: Serialize>(
    path: impl AsRef<Path>,
    header: Option<&Header>,
    items: &[T],
) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    if let Some(header) = header {
        write_line(&mut out, path, &HeaderLine {
            header: header.clone(),
        })?;
    }
    for item in items {
        write_line(&mut out, path, item)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a JSONL file, returning its header line if the first line is one.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<(Option<Header>, Vec<T>)> {
    let path = path.as_ref();
    let mut header = None;
    let mut items = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && line.starts_with("{\"header\":") {
            if let Ok(h) = serde_json::from_str::<HeaderLine>(&line) {
                header = Some(h.header);
                continue;
            }
        }
        items.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok((header, items))
}

pub fn write_run(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    write_jsonl(path, None, records)
}

pub fn read_run(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    read_jsonl(path).map(|(_, records)| records)
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<SampleScores>> {
    read_jsonl(path).map(|(_, scores)| scores)
}
