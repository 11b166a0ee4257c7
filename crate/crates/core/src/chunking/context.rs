use std::collections::BTreeSet;
use std::ops::Range;

use crate::corpus::{Document, GoldSpan, Sentence};
use crate::text::{tokenize, CharIndex, TokenSequence, Vocabulary};

use super::split::split_overlong;
use super::ChunkingError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Gold targets are built and keyphrase spans are never cut.
    Train,
    /// No targets; every position is a legal cut.
    Infer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkingConfig {
    /// Sentences per context window.
    pub window_sentences: usize,
    pub with_query: bool,
    /// Maximum model input length in tokens, specials included.
    pub max_input_size: usize,
    pub mode: Mode,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self { window_sentences: 1, with_query: true, max_input_size: 512, mode: Mode::Train }
    }
}

impl ChunkingConfig {
    pub fn validate(&self) -> Result<(), ChunkingError> {
        if self.window_sentences == 0 {
            return Err(ChunkingError::InvalidConfig("window_sentences must be positive".into()));
        }
        if self.max_input_size < 3 {
            return Err(ChunkingError::InvalidConfig(
                "max_input_size must fit CLS, SEP and one text token".into(),
            ));
        }
        Ok(())
    }

    /// Longest query kept, in tokens. Half of what remains after the three
    /// specials, so the text segment always keeps at least as many.
    pub fn max_query_tokens(&self) -> usize {
        self.max_input_size.saturating_sub(3) / 2
    }
}

/// Positions of the input segments. `len` excludes padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub query: Option<Range<usize>>,
    pub text: Range<usize>,
    pub len: usize,
}

/// Binary start/end targets over the whole input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Targets {
    pub start: Vec<u8>,
    pub end: Vec<u8>,
}

/// One model input.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    pub doc_id: String,
    /// Inclusive sentence indices of the window this context came from.
    pub sentence_range: (usize, usize),
    /// Index of the piece within its window (0 unless the window was split).
    pub piece: usize,
    pub input_ids: Vec<u32>,
    /// 0 for CLS and the query side, 1 for the text side.
    pub segment_ids: Vec<u8>,
    pub layout: Layout,
    /// Body char offsets of the text-segment tokens.
    pub text_offsets: Vec<(usize, usize)>,
    pub text_word_start: Vec<bool>,
    pub text_word_end: Vec<bool>,
    /// Body char offset where [`Context::text`] begins.
    pub text_char_start: usize,
    /// Source text covered by the text segment.
    pub text: String,
    /// Deduplicated gold spans inside the text segment, inclusive and
    /// relative to the text segment.
    pub gold_spans: Vec<(usize, usize)>,
    pub targets: Option<Targets>,
    pub truncated: bool,
}

impl Context {
    pub fn len(&self) -> usize {
        self.input_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input_ids.is_empty()
    }

    /// True on text-segment, non-padding positions.
    pub fn valid_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.layout.text.contains(&i)).collect()
    }

    /// Input position of text-segment token `t`.
    pub fn text_position(&self, t: usize) -> usize {
        self.layout.text.start + t
    }

    /// Surface string of an input-position span, sliced from the source.
    pub fn surface(&self, s: usize, e: usize) -> String {
        let (cs, _) = self.text_offsets[s - self.layout.text.start];
        let (_, ce) = self.text_offsets[e - self.layout.text.start];
        self.text
            .chars()
            .skip(cs - self.text_char_start)
            .take(ce - cs)
            .collect()
    }

    /// Body char span of an input-position span.
    pub fn char_span(&self, s: usize, e: usize) -> (usize, usize) {
        let start = self.layout.text.start;
        (self.text_offsets[s - start].0, self.text_offsets[e - start].1)
    }

    /// Appends PAD tokens up to `len`; padding is never valid.
    pub fn pad_to(&mut self, len: usize, pad_id: u32) {
        while self.input_ids.len() < len {
            self.input_ids.push(pad_id);
            self.segment_ids.push(0);
            if let Some(t) = &mut self.targets {
                t.start.push(0);
                t.end.push(0);
            }
        }
    }
}

/// Contexts of one document plus what went wrong while building them.
#[derive(Debug, Clone, Default)]
pub struct ChunkedDocument {
    pub contexts: Vec<Context>,
    /// `with_query` was requested but the document has no usable query.
    pub query_missing: bool,
    /// Gold spans dropped because they cross a window boundary.
    pub dropped_spans: usize,
    pub truncated_contexts: usize,
}

/// Query tokens used for a document under `cfg`, or `None` when the input
/// carries no query segment.
fn query_tokens(doc: &Document, cfg: &ChunkingConfig, vocab: &Vocabulary) -> Option<Vec<u32>> {
    if !cfg.with_query {
        return None;
    }
    let q = doc.query.as_deref().map(|q| tokenize(q, vocab)).filter(|t| !t.is_empty())?;
    let keep = cfg.max_query_tokens().min(q.len());
    (keep > 0).then(|| q.ids[..keep].to_vec())
}

/// Special-token overhead plus query length.
fn overhead(query: Option<&Vec<u32>>) -> usize {
    match query {
        Some(q) => q.len() + 3,
        None => 2,
    }
}

/// Groups sentence indices into consecutive windows of `size`.
pub fn sentence_windows(n_sentences: usize, size: usize) -> Vec<(usize, usize)> {
    (0..n_sentences)
        .step_by(size)
        .map(|s| (s, (s + size).min(n_sentences) - 1))
        .collect()
}

/// Token index range of the body tokens lying inside `[cs, ce)`.
fn tokens_in(tokens: &TokenSequence, cs: usize, ce: usize) -> Range<usize> {
    let a = tokens.offsets.partition_point(|&(s, _)| s < cs);
    let b = tokens.offsets.partition_point(|&(_, e)| e <= ce);
    a..b.max(a)
}

/// Maps char spans to inclusive body-token spans; spans not aligned to token
/// boundaries are ignored.
fn token_spans(tokens: &TokenSequence, spans: &[GoldSpan]) -> Vec<(usize, usize)> {
    let mut out = BTreeSet::new();
    for g in spans {
        let s = tokens.offsets.binary_search_by_key(&g.char_start, |&(a, _)| a);
        let e = tokens.offsets.binary_search_by_key(&g.char_end, |&(_, b)| b);
        if let (Ok(s), Ok(e)) = (s, e) {
            if s <= e {
                out.insert((s, e));
            }
        }
    }
    out.into_iter().collect()
}

/// Builds the model inputs for one document.
///
/// Sentences are grouped into non-overlapping windows; each window becomes
/// `[CLS] query [SEP] text [SEP]` (or `[CLS] text [SEP]`). Windows longer
/// than the input limit are split without cutting gold spans (train mode),
/// and the query is repeated on every piece.
pub fn build_contexts(
    doc: &Document,
    sentences: &[Sentence],
    gold_spans: &[GoldSpan],
    cfg: &ChunkingConfig,
    vocab: &Vocabulary,
) -> ChunkedDocument {
    let mut out = ChunkedDocument::default();
    if sentences.is_empty() {
        return out;
    }
    let query = query_tokens(doc, cfg, vocab);
    if cfg.with_query && query.is_none() {
        log::warn!("document {}: no query available; contexts built without one", doc.id);
        out.query_missing = true;
    }
    let budget = cfg.max_input_size - overhead(query.as_ref());
    let tokens = tokenize(&doc.body, vocab);
    let spans = match cfg.mode {
        Mode::Train => token_spans(&tokens, gold_spans),
        Mode::Infer => Vec::new(),
    };
    let index = CharIndex::new(&doc.body);
    let special = vocab.special();

    for (first, last) in sentence_windows(sentences.len(), cfg.window_sentences) {
        let window = tokens_in(&tokens, sentences[first].char_start, sentences[last].char_end);
        let local: Vec<(usize, usize)> = spans
            .iter()
            .filter(|&&(s, _)| window.contains(&s))
            .filter_map(|&(s, e)| {
                if e < window.end {
                    Some((s - window.start, e - window.start))
                } else {
                    out.dropped_spans += 1;
                    log::info!("document {}: gold span crosses a window boundary; dropped", doc.id);
                    None
                }
            })
            .collect();
        if window.is_empty() {
            continue;
        }
        let plan = split_overlong(window.len(), &local, budget);
        if plan.truncated {
            log::warn!(
                "document {}: sentences {first}..={last} cannot be split legally; truncated to {budget} tokens",
                doc.id
            );
            out.truncated_contexts += 1;
        }
        for (piece_idx, piece) in plan.pieces.iter().enumerate() {
            let mut input_ids = vec![special.cls];
            let mut segment_ids = vec![0u8];
            let query_range = query.as_ref().map(|q| {
                input_ids.extend(q);
                input_ids.push(special.sep);
                segment_ids.extend(std::iter::repeat_n(0, q.len() + 1));
                1..1 + q.len()
            });
            let text_start = input_ids.len();
            let body_range = window.start + piece.start..window.start + piece.end;
            input_ids.extend(&tokens.ids[body_range.clone()]);
            input_ids.push(special.sep);
            segment_ids.extend(std::iter::repeat_n(1, body_range.len() + 1));
            let text = text_start..text_start + body_range.len();

            let piece_spans: Vec<(usize, usize)> = local
                .iter()
                .filter(|&&(s, e)| s >= piece.start && e < piece.end)
                .map(|&(s, e)| (s - piece.start, e - piece.start))
                .collect();
            let targets = (cfg.mode == Mode::Train).then(|| {
                let mut t = Targets { start: vec![0; input_ids.len()], end: vec![0; input_ids.len()] };
                for &(s, e) in &piece_spans {
                    t.start[text_start + s] = 1;
                    t.end[text_start + e] = 1;
                }
                t
            });
            let text_offsets = tokens.offsets[body_range.clone()].to_vec();
            let cs = text_offsets[0].0;
            let ce = text_offsets[text_offsets.len() - 1].1;
            let len = input_ids.len();
            debug_assert!(len <= cfg.max_input_size);
            out.contexts.push(Context {
                doc_id: doc.id.clone(),
                sentence_range: (first, last),
                piece: piece_idx,
                input_ids,
                segment_ids,
                layout: Layout { query: query_range, text, len },
                text_word_start: tokens.word_start[body_range.clone()].to_vec(),
                text_word_end: body_range.clone().map(|i| tokens.word_end(i)).collect(),
                text_offsets,
                text_char_start: cs,
                text: index.slice(&doc.body, cs, ce).to_string(),
                gold_spans: piece_spans,
                targets,
                truncated: plan.truncated,
            });
        }
    }
    out
}

/// Fraction of sentence windows whose full input (query and specials
/// included) exceeds `max_input_size` before splitting.
pub fn saturation_stats(docs: &[Document], cfg: &ChunkingConfig, vocab: &Vocabulary) -> f64 {
    let mut windows = 0usize;
    let mut over = 0usize;
    for doc in docs {
        let sentences = crate::corpus::split_sentences(&doc.body);
        if sentences.is_empty() {
            continue;
        }
        let query = query_tokens(doc, cfg, vocab);
        let extra = overhead(query.as_ref());
        let tokens = tokenize(&doc.body, vocab);
        for (first, last) in sentence_windows(sentences.len(), cfg.window_sentences) {
            let n = tokens_in(&tokens, sentences[first].char_start, sentences[last].char_end).len();
            windows += 1;
            if n + extra > cfg.max_input_size {
                over += 1;
            }
        }
    }
    if windows == 0 {
        0.0
    } else {
        over as f64 / windows as f64
    }
}

/// Fraction of contexts whose text segment contains any of `headlines` as a
/// case-sensitive substring.
pub fn headline_stats(contexts: &[Context], headlines: &[String]) -> f64 {
    if contexts.is_empty() {
        return 0.0;
    }
    let hits = contexts
        .iter()
        .filter(|c| headlines.iter().any(|h| !h.is_empty() && c.text.contains(h.as_str())))
        .count();
    hits as f64 / contexts.len() as f64
}
