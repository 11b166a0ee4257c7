//! Keyphrase decoding: candidate span enumeration, document-wide merging by
//! normalized form and top-k selection.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunking::Context;
use crate::model::{ModelError, SpanModel, TokenProbabilities};
use crate::scalar::Scalar;
use crate::text::{normalize_keyphrases, Normalizer, TextError};


#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("invalid extraction config: {0}")]
    InvalidConfig(String),
}

/// How the scores of predictions sharing a normalized form are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeStrategy {
    #[default]
    Max,
    Sum,
    Mean,
}

impl std::str::FromStr for MergeStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Self::Max),
            "sum" => Ok(Self::Sum),
            "mean" => Ok(Self::Mean),
            other => Err(format!("unknown merge strategy {other:?}")),
        }
    }
}

impl std::fmt::Display for MergeStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Max => "max",
            Self::Sum => "sum",
            Self::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionConfig {
    pub top_k: usize,
    /// Longest candidate span, in subword tokens.
    pub max_span_tokens: usize,
    pub merge: MergeStrategy,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self { top_k: 10, max_span_tokens: 6, merge: MergeStrategy::Max }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<(), ExtractionError> {
        if self.top_k == 0 || self.max_span_tokens == 0 {
            return Err(ExtractionError::InvalidConfig("top_k and max_span_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// One scored candidate span of one context.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanPrediction<T> {
    pub doc_id: String,
    pub context_index: usize,
    /// Inclusive input positions.
    pub start: usize,
    pub end: usize,
    /// Body char span, end exclusive.
    pub char_start: usize,
    pub char_end: usize,
    pub surface: String,
    pub score: T,
}

/// A document-level keyphrase after merging.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyphraseResult<T> {
    pub normalized: String,
    pub surface: String,
    pub score: T,
    pub support_count: usize,
}

/// Every word-aligned span of valid positions up to `max_span_tokens` long,
/// scored `v_s[s] * v_e[e]`.
pub fn enumerate_spans<T: Scalar>(
    probs: &TokenProbabilities<T>,
    ctx: &Context,
    context_index: usize,
    max_span_tokens: usize,
) -> Vec<SpanPrediction<T>> {
    let text = ctx.layout.text.clone();
    let valid = |i: usize| probs.valid.get(i).copied().unwrap_or(false) && text.contains(&i);
    let mut out = Vec::new();
    for s in text.clone() {
        if !valid(s) || !ctx.text_word_start[s - text.start] {
            continue;
        }
        for e in s..(s + max_span_tokens).min(text.end) {
            if !valid(e) {
                break;
            }
            if !ctx.text_word_end[e - text.start] {
                continue;
            }
            let (char_start, char_end) = ctx.char_span(s, e);
            out.push(SpanPrediction {
                doc_id: ctx.doc_id.clone(),
                context_index,
                start: s,
                end: e,
                char_start,
                char_end,
                surface: ctx.surface(s, e),
                score: probs.start[s] * probs.end[e],
            });
        }
    }
    out
}

/// Ranking order: score descending, then normalized form ascending.
pub fn rank_order<T: Scalar>(a: &KeyphraseResult<T>, b: &KeyphraseResult<T>) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.normalized.cmp(&b.normalized))
}

/// Merges predictions by normalized surface and returns the top `k`.
/// Predictions whose surface normalizes to nothing are dropped.
pub fn merge_predictions<T: Scalar>(
    predictions: &[SpanPrediction<T>],
    normalizer: &dyn Normalizer,
    k: usize,
    merge: MergeStrategy,
) -> Result<Vec<KeyphraseResult<T>>, TextError> {
    let mut surfaces: Vec<&str> = predictions.iter().map(|p| p.surface.as_str()).collect();
    surfaces.sort_unstable();
    surfaces.dedup();
    let keys = normalize_keyphrases(&surfaces, normalizer)?;
    let key_of: HashMap<&str, &str> = surfaces.iter().copied().zip(keys.iter().map(String::as_str)).collect();

    let mut groups: HashMap<&str, Vec<(T, &str)>> = HashMap::new();
    for p in predictions {
        let key = key_of[p.surface.as_str()];
        if !key.is_empty() {
            groups.entry(key).or_default().push((p.score, p.surface.as_str()));
        }
    }
    let mut results: Vec<KeyphraseResult<T>> = groups
        .into_iter()
        .map(|(key, mut members)| {
            members.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then_with(|| a.1.cmp(b.1)));
            let best = members[0];
            let n = members.len();
            let score = match merge {
                MergeStrategy::Max => best.0,
                MergeStrategy::Sum => members.iter().map(|m| m.0).sum(),
                MergeStrategy::Mean => members.iter().map(|m| m.0).sum::<T>() / T::from_usize(n).unwrap(),
            };
            KeyphraseResult { normalized: key.to_string(), surface: best.1.to_string(), score, support_count: n }
        })
        .collect();
    results.sort_by(rank_order);
    results.truncate(k);
    Ok(results)
}

/// Decodes a document from precomputed per-context probabilities.
pub fn decode<T: Scalar>(
    contexts: &[Context],
    probs: &[TokenProbabilities<T>],
    cfg: &ExtractionConfig,
    normalizer: &dyn Normalizer,
) -> Result<Vec<KeyphraseResult<T>>, ExtractionError> {
    cfg.validate()?;
    let predictions: Vec<SpanPrediction<T>> = contexts
        .iter()
        .zip(probs)
        .enumerate()
        .flat_map(|(i, (c, p))| enumerate_spans(p, c, i, cfg.max_span_tokens))
        .collect();
    Ok(merge_predictions(&predictions, normalizer, cfg.top_k, cfg.merge)?)
}

/// Scores every context of one document with `model` and decodes the top-k
/// keyphrases. Contexts are expected to be built in inference mode.
pub fn extract_document<T: Scalar>(
    contexts: &[Context],
    model: &SpanModel<T>,
    cfg: &ExtractionConfig,
    normalizer: &dyn Normalizer,
) -> Result<Vec<KeyphraseResult<T>>, ExtractionError> {
    let probs = contexts
        .par_iter()
        .map(|c| model.probabilities(c))
        .collect::<Result<Vec<_>, _>>()?;
    decode(contexts, &probs, cfg, normalizer)
}

/// One keyphrase of the prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictedKeyphrase {
    pub text: String,
    pub normalized: String,
    pub score: f64,
}

/// One line of the prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentPrediction {
    pub id: String,
    pub keyphrases: Vec<PredictedKeyphrase>,
}

impl DocumentPrediction {
    pub fn from_results<T: Scalar>(id: &str, results: &[KeyphraseResult<T>]) -> Self {
        Self {
            id: id.to_string(),
            keyphrases: results
                .iter()
                .map(|r| PredictedKeyphrase {
                    text: r.surface.clone(),
                    normalized: r.normalized.clone(),
                    score: r.score.as_f64(),
                })
                .collect(),
        }
    }
}

/// Writes predictions as JSON lines.
pub fn write_predictions<W: Write>(mut out: W, predictions: &[DocumentPrediction]) -> std::io::Result<()> {
    for p in predictions {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Parses a JSON-lines prediction file; blank lines are skipped and errors
/// carry the 1-based line number.
pub fn read_predictions(text: &str) -> Result<Vec<DocumentPrediction>, (usize, String)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e.to_string())))
        .collect()
}
