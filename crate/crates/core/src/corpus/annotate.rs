use std::collections::HashMap;

use crate::text::words::content_words;
use crate::text::{normalize_keyphrases, Normalizer, TextError};

use super::Document;

/// An occurrence of a gold keyphrase in the body, in char offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GoldSpan {
    pub char_start: usize,
    pub char_end: usize,
    pub keyphrase_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnotateConfig {
    /// Largest window, in words, that may match a keyphrase.
    pub max_window_words: usize,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        Self { max_window_words: 16 }
    }
}

/// Locates every occurrence of each gold keyphrase in the body.
///
/// An occurrence is a window of consecutive content words whose normalized
/// tokens equal the keyphrase's normalized tokens. Spans are returned sorted
/// by `(char_start, char_end, keyphrase_index)`.
pub fn annotate_gold_spans(
    doc: &Document,
    normalizer: &dyn Normalizer,
    cfg: AnnotateConfig,
) -> Result<Vec<GoldSpan>, TextError> {
    let keys = normalize_keyphrases(&doc.gold_keyphrases, normalizer)?;
    let mut wanted: HashMap<Vec<&str>, Vec<usize>> = HashMap::new();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            log::warn!(
                "document {}: keyphrase {:?} normalizes to nothing; skipped",
                doc.id,
                doc.gold_keyphrases[i]
            );
            continue;
        }
        wanted.entry(key.split(' ').collect()).or_default().push(i);
    }
    if wanted.is_empty() {
        return Ok(Vec::new());
    }

    let chars: Vec<char> = doc.body.chars().collect();
    let words = content_words(&doc.body);
    let surfaces: Vec<String> = words.iter().map(|w| chars[w.start..w.end].iter().collect()).collect();
    let word_forms = normalize_keyphrases(&surfaces, normalizer)?;
    let word_tokens: Vec<Vec<&str>> = word_forms.iter().map(|f| f.split_whitespace().collect()).collect();
    let longest = wanted.keys().map(Vec::len).max().unwrap_or(0);

    let mut spans = Vec::new();
    let mut window: Vec<&str> = Vec::with_capacity(longest);
    for i in 0..words.len() {
        window.clear();
        for j in i..words.len().min(i + cfg.max_window_words) {
            window.extend(&word_tokens[j]);
            if window.len() > longest {
                break;
            }
            if let Some(kps) = wanted.get(&window) {
                for &k in kps {
                    spans.push(GoldSpan {
                        char_start: words[i].start,
                        char_end: words[j].end,
                        keyphrase_index: k,
                    });
                }
            }
        }
    }
    spans.sort_unstable();
    Ok(spans)
}
