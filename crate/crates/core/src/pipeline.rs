//! End-to-end glue: annotation, context building and corpus-level
//! extraction shared by the CLI, sweeps and tests.

use std::collections::HashMap;

use log::warn;
use rayon::prelude::*;

use crate::chunking::{build_contexts, ChunkingConfig, ChunkingError, Context, Mode};
use crate::corpus::{annotate_gold_spans, split_sentences, AnnotateConfig, Document, GoldSpan};
use crate::extraction::{extract_document, DocumentPrediction, ExtractionConfig, ExtractionError};
use crate::evaluation::{f1_at_k, EvalError, EvalReport};
use crate::model::{EncoderConfig, ModelError, SpanModel};
use crate::scalar::Scalar;
use crate::text::{Normalizer, TextError, Vocabulary};
use crate::training::{train, TrainLog, TrainStart, TrainingConfig, TrainingError, ValidationDocument, ValidationSet};

/// Gold spans of every document.
pub fn annotate_corpus(
    docs: &[Document],
    normalizer: &dyn Normalizer,
    cfg: AnnotateConfig,
) -> Result<Vec<Vec<GoldSpan>>, TextError> {
    docs.iter().map(|d| annotate_gold_spans(d, normalizer, cfg)).collect()
}

/// Contexts of a corpus plus build diagnostics.
#[derive(Debug, Clone, Default)]
pub struct CorpusContexts {
    /// Contexts per document, in document order.
    pub documents: Vec<Vec<Context>>,
    pub query_missing: usize,
    pub dropped_spans: usize,
    pub truncated_contexts: usize,
}

impl CorpusContexts {
    pub fn flatten(&self) -> Vec<Context> {
        self.documents.iter().flatten().cloned().collect()
    }
}

/// Builds contexts for every document. `spans` is required in train mode
/// and ignored in infer mode.
pub fn corpus_contexts(
    docs: &[Document],
    spans: Option<&[Vec<GoldSpan>]>,
    cfg: &ChunkingConfig,
    vocab: &Vocabulary,
) -> CorpusContexts {
    let built: Vec<_> = docs
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let gold = match (cfg.mode, spans) {
                (Mode::Train, Some(s)) => s[i].as_slice(),
                _ => &[],
            };
            build_contexts(d, &split_sentences(&d.body), gold, cfg, vocab)
        })
        .collect();
    let mut out = CorpusContexts::default();
    for b in built {
        out.query_missing += usize::from(b.query_missing);
        out.dropped_spans += b.dropped_spans;
        out.truncated_contexts += b.truncated_contexts;
        out.documents.push(b.contexts);
    }
    if out.query_missing > 0 {
        warn!("{} documents have no query and were built without one", out.query_missing);
    }
    if out.truncated_contexts > 0 {
        warn!("{} contexts had no legal split and were truncated", out.truncated_contexts);
    }
    out
}

/// Training-mode contexts of annotated documents.
pub fn training_contexts(
    docs: &[Document],
    spans: &[Vec<GoldSpan>],
    cfg: &ChunkingConfig,
    vocab: &Vocabulary,
) -> CorpusContexts {
    let cfg = ChunkingConfig { mode: Mode::Train, ..cfg.clone() };
    corpus_contexts(docs, Some(spans), &cfg, vocab)
}

/// Loss contexts and extraction documents for validation.
pub fn validation_set(
    docs: &[Document],
    spans: &[Vec<GoldSpan>],
    cfg: &ChunkingConfig,
    vocab: &Vocabulary,
) -> ValidationSet {
    let loss_contexts = training_contexts(docs, spans, cfg, vocab).flatten();
    let infer = ChunkingConfig { mode: Mode::Infer, ..cfg.clone() };
    let contexts = corpus_contexts(docs, None, &infer, vocab);
    let documents = docs
        .iter()
        .zip(contexts.documents)
        .map(|(d, contexts)| ValidationDocument { id: d.id.clone(), contexts, gold: d.gold_keyphrases.clone() })
        .collect();
    ValidationSet { loss_contexts, documents }
}

/// Top-k keyphrases of every document, in document order, with the number
/// of documents that lacked a query.
pub fn extract_corpus<T: Scalar>(
    docs: &[Document],
    model: &SpanModel<T>,
    chunking: &ChunkingConfig,
    extraction: &ExtractionConfig,
    vocab: &Vocabulary,
    normalizer: &dyn Normalizer,
) -> Result<(Vec<DocumentPrediction>, usize), ExtractionError> {
    let infer = ChunkingConfig { mode: Mode::Infer, ..chunking.clone() };
    let contexts = corpus_contexts(docs, None, &infer, vocab);
    let mut out = Vec::with_capacity(docs.len());
    for (d, ctxs) in docs.iter().zip(&contexts.documents) {
        let results = extract_document(ctxs, model, extraction, normalizer)?;
        out.push(DocumentPrediction::from_results(&d.id, &results));
    }
    Ok((out, contexts.query_missing))
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Chunking(#[from] ChunkingError),
}

/// Annotated splits and shared resources of a sweep.
pub struct SweepData<'a> {
    pub train_docs: &'a [Document],
    pub train_spans: &'a [Vec<GoldSpan>],
    pub val_docs: &'a [Document],
    pub val_spans: &'a [Vec<GoldSpan>],
    pub test_docs: &'a [Document],
    pub vocab: &'a Vocabulary,
    pub normalizer: &'a dyn Normalizer,
}

/// Settings shared by every cell; window, query and seed vary per cell.
#[derive(Debug, Clone)]
pub struct CellSettings {
    pub chunking: ChunkingConfig,
    pub encoder: EncoderConfig,
    pub training: TrainingConfig,
    pub extraction: ExtractionConfig,
}

/// Outputs of one trained and evaluated cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub report: EvalReport,
    pub log: TrainLog,
    pub predictions: Vec<DocumentPrediction>,
}

/// Scores predictions against the gold keyphrases of `docs`.
pub fn evaluate_predictions(
    predictions: &[DocumentPrediction],
    docs: &[Document],
    k: usize,
    normalizer: &dyn Normalizer,
) -> Result<EvalReport, EvalError> {
    let ranked: Vec<(String, Vec<String>)> = predictions
        .iter()
        .map(|p| (p.id.clone(), p.keyphrases.iter().map(|k| k.text.clone()).collect()))
        .collect();
    let golds: HashMap<String, Vec<String>> = docs.iter().map(|d| (d.id.clone(), d.gold_keyphrases.clone())).collect();
    f1_at_k(&ranked, &golds, k, normalizer)
}

/// Trains on the training split with one (window, query, seed) setting,
/// selects on validation, and evaluates F1@k on the test split.
pub fn run_sweep_cell<T: Scalar>(
    data: &SweepData<'_>,
    settings: &CellSettings,
    window_sentences: usize,
    with_query: bool,
    seed: u64,
) -> Result<CellResult, PipelineError> {
    let chunking = ChunkingConfig { window_sentences, with_query, ..settings.chunking.clone() };
    chunking.validate()?;
    let encoder = EncoderConfig { seed, vocab_size: data.vocab.len(), max_positions: chunking.max_input_size, ..settings.encoder.clone() };
    let training = TrainingConfig { seed, ..settings.training.clone() };
    let contexts = training_contexts(data.train_docs, data.train_spans, &chunking, data.vocab).flatten();
    let val = validation_set(data.val_docs, data.val_spans, &chunking, data.vocab);
    let model = SpanModel::<T>::new(encoder)?;
    let outcome = train(TrainStart::fresh(model), &contexts, &val, &training, data.normalizer, &data.vocab.hash())?;
    let best = SpanModel::from_params(outcome.best.config, outcome.best.params)?;
    let (predictions, _) =
        extract_corpus(data.test_docs, &best, &chunking, &settings.extraction, data.vocab, data.normalizer)?;
    let report = evaluate_predictions(&predictions, data.test_docs, settings.extraction.top_k, data.normalizer)?;
    Ok(CellResult { report, log: outcome.log, predictions })
}
