use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::TextError;

/// Names of the special tokens as they appear in the vocabulary file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialTokens {
    pub cls: String,
    pub sep: String,
    pub pad: String,
    pub unk: String,
    pub mask: String,
}

impl Default for SpecialTokens {
    fn default() -> Self {
        Self {
            cls: "[CLS]".into(),
            sep: "[SEP]".into(),
            pad: "[PAD]".into(),
            unk: "[UNK]".into(),
            mask: "[MASK]".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialIds {
    pub cls: u32,
    pub sep: u32,
    pub pad: u32,
    pub unk: u32,
    pub mask: u32,
}

impl SpecialIds {
    pub fn contains(&self, id: u32) -> bool {
        [self.cls, self.sep, self.pad, self.unk, self.mask].contains(&id)
    }
}

/// Subword vocabulary; the line number of an entry is its id.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, u32>,
    special: SpecialIds,
    continuation: String,
    max_word_chars: usize,
}

pub const CONTINUATION_MARKER: &str = "##";

impl Vocabulary {
    pub fn new(entries: Vec<String>, names: &SpecialTokens) -> Result<Self, TextError> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.is_empty() {
                return Err(TextError::InvalidVocabulary(format!("empty entry at line {}", i + 1)));
            }
            if index.insert(e.clone(), i as u32).is_some() {
                return Err(TextError::InvalidVocabulary(format!("duplicate entry {e:?}")));
            }
        }
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| TextError::InvalidVocabulary(format!("missing special token {name:?}")))
        };
        let special = SpecialIds {
            cls: lookup(&names.cls)?,
            sep: lookup(&names.sep)?,
            pad: lookup(&names.pad)?,
            unk: lookup(&names.unk)?,
            mask: lookup(&names.mask)?,
        };
        let ids = [special.cls, special.sep, special.pad, special.unk, special.mask];
        let distinct: BTreeSet<u32> = ids.iter().copied().collect();
        if distinct.len() != ids.len() {
            return Err(TextError::InvalidVocabulary("special tokens must be distinct".into()));
        }
        Ok(Self {
            entries,
            index,
            special,
            continuation: CONTINUATION_MARKER.into(),
            max_word_chars: 100,
        })
    }

    pub fn from_file(path: impl AsRef<Path>, names: &SpecialTokens) -> Result<Self, TextError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| TextError::Io(path.display().to_string(), e))?;
        let entries = text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect();
        Self::new(entries, names)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), TextError> {
        let path = path.as_ref();
        let mut out = self.entries.join("\n");
        out.push('\n');
        fs::write(path, out).map_err(|e| TextError::Io(path.display().to_string(), e))
    }

    /// Builds a vocabulary from a corpus: specials, every alphanumeric word
    /// seen, plus every single character both as a word-initial piece and as
    /// a continuation piece, so that no seen text falls back to UNK.
    pub fn from_corpus<'a>(texts: impl IntoIterator<Item = &'a str>, names: &SpecialTokens) -> Self {
        let mut words = BTreeSet::new();
        let mut chars = BTreeSet::new();
        for t in texts {
            for w in super::words::split_words(t) {
                let s: String = t.chars().skip(w.start).take(w.len()).collect();
                chars.extend(s.chars());
                words.insert(s);
            }
        }
        let mut entries = vec![
            names.pad.clone(),
            names.unk.clone(),
            names.cls.clone(),
            names.sep.clone(),
            names.mask.clone(),
        ];
        let mut seen: BTreeSet<String> = entries.iter().cloned().collect();
        let mut push = |s: String, entries: &mut Vec<String>| {
            if seen.insert(s.clone()) {
                entries.push(s);
            }
        };
        for c in &chars {
            push(c.to_string(), &mut entries);
            push(format!("{CONTINUATION_MARKER}{c}"), &mut entries);
        }
        for w in words {
            push(w, &mut entries);
        }
        Self::new(entries, names).expect("corpus vocabulary is well formed")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.index.get(piece).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(String::as_str)
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn special(&self) -> SpecialIds {
        self.special
    }

    pub fn continuation(&self) -> &str {
        &self.continuation
    }

    pub fn max_word_chars(&self) -> usize {
        self.max_word_chars
    }

    /// Hex SHA-256 over the newline-joined entries; stored in checkpoints.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
