//! Pre-tokenization into words.
//!
//! A word is either a maximal run of alphanumeric characters or a single
//! character that is neither alphanumeric nor whitespace (punctuation and
//! symbols stand alone). All offsets are counted in Unicode scalar values.

/// A word located in its source string, in char offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Word {
    pub start: usize,
    pub end: usize,
    pub is_punct: bool,
}

impl Word {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

pub fn split_words(text: &str) -> Vec<Word> {
    let mut words = Vec::new();
    let mut run_start: Option<usize> = None;
    let mut n = 0;
    for (i, c) in text.chars().enumerate() {
        n = i + 1;
        if c.is_alphanumeric() {
            if run_start.is_none() {
                run_start = Some(i);
            }
            continue;
        }
        if let Some(s) = run_start.take() {
            words.push(Word { start: s, end: i, is_punct: false });
        }
        if !c.is_whitespace() {
            words.push(Word { start: i, end: i + 1, is_punct: true });
        }
    }
    if let Some(s) = run_start {
        words.push(Word { start: s, end: n, is_punct: false });
    }
    words
}

/// Content words only (punctuation dropped).
pub fn content_words(text: &str) -> Vec<Word> {
    split_words(text).into_iter().filter(|w| !w.is_punct).collect()
}

/// Maps char offsets to byte offsets for one string.
#[derive(Debug, Clone)]
pub struct CharIndex {
    bytes: Vec<usize>,
}

impl CharIndex {
    pub fn new(text: &str) -> Self {
        let mut bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bytes.push(text.len());
        Self { bytes }
    }

    /// Number of chars in the indexed string.
    pub fn char_len(&self) -> usize {
        self.bytes.len() - 1
    }

    pub fn byte(&self, char_pos: usize) -> usize {
        self.bytes[char_pos]
    }

    pub fn slice<'a>(&self, text: &'a str, start: usize, end: usize) -> &'a str {
        &text[self.bytes[start]..self.bytes[end]]
    }
}

/// Slice `text` by char offsets. Allocates an index; prefer [`CharIndex`] in loops.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let mut it = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b0 = it.nth(start).unwrap_or(text.len());
    let b1 = if end > start {
        it.nth(end - start - 1).unwrap_or(text.len())
    } else {
        b0
    };
    &text[b0..b1]
}
