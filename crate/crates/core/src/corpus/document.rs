use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, GoldSpan};

fn default_language() -> String {
    "en".into()
}

/// One dataset record as stored on disk (JSON lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    #[serde(default)]
    title: Option<String>,
    body: String,
    #[serde(default)]
    keyphrases: Vec<String>,
    #[serde(default = "default_language")]
    language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_spans: Option<Vec<[usize; 3]>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    /// Topic-defining query; the title in practice.
    pub query: Option<String>,
    pub body: String,
    pub gold_keyphrases: Vec<String>,
    pub language: String,
}

impl Document {
    pub fn new(id: impl Into<String>, query: Option<&str>, body: impl Into<String>, keyphrases: &[&str]) -> Self {
        Self {
            id: id.into(),
            query: query.map(str::to_string),
            body: body.into(),
            gold_keyphrases: keyphrases.iter().map(|s| s.to_string()).collect(),
            language: default_language(),
        }
    }
}

fn open(path: &Path) -> Result<File, CorpusError> {
    File::open(path).map_err(|e| CorpusError::Io(path.display().to_string(), e))
}

/// Reads a JSON-lines dataset. Blank lines are ignored; line numbers in
/// errors are 1-based.
pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Vec<Document>, CorpusError> {
    let path = path.as_ref();
    let reader = BufReader::new(open(path)?);
    let mut docs = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if !ids.insert(rec.id.clone()) {
            return Err(CorpusError::DuplicateId(rec.id));
        }
        docs.push(Document {
            id: rec.id,
            query: rec.title,
            body: rec.body,
            gold_keyphrases: rec.keyphrases,
            language: rec.language,
        });
    }
    Ok(docs)
}

fn record(doc: &Document, spans: Option<&[GoldSpan]>) -> Record {
    Record {
        id: doc.id.clone(),
        title: doc.query.clone(),
        body: doc.body.clone(),
        keyphrases: doc.gold_keyphrases.clone(),
        language: doc.language.clone(),
        gold_spans: spans.map(|s| s.iter().map(|g| [g.char_start, g.char_end, g.keyphrase_index]).collect()),
    }
}

/// Writes documents in the dataset schema, with `gold_spans` when given.
pub fn write_dataset(
    path: impl AsRef<Path>,
    docs: &[Document],
    spans: Option<&[Vec<GoldSpan>]>,
) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |e| CorpusError::Io(path.display().to_string(), e);
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    for (i, doc) in docs.iter().enumerate() {
        let rec = record(doc, spans.map(|s| s[i].as_slice()));
        let line = serde_json::to_string(&rec).expect("record serializes");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}
