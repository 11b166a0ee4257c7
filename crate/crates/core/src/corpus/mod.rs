//! Dataset ingestion, sentence splitting, gold-span annotation and statistics.

mod annotate;
mod document;
mod sentences;
mod stats;

use thiserror::Error;

pub use annotate::{annotate_gold_spans, AnnotateConfig, GoldSpan};
pub use document::{parse_dataset, write_dataset, Document};
pub use sentences::{split_sentences, Sentence};
pub use stats::{dataset_stats, StatsReport};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}
