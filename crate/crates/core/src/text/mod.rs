//! Tokenization with char offsets and keyphrase normalization.

mod normalize;
mod porter;
mod tokenizer;
mod vocab;
pub mod words;

use thiserror::Error;

pub use normalize::{
    normalize_keyphrase, normalize_keyphrases, phrase_words, CommandNormalizer, IdentityNormalizer, Normalizer,
    PorterNormalizer,
};
pub use porter::porter_stem;
pub use tokenizer::{tokenize, TokenSequence};
pub use vocab::{SpecialIds, SpecialTokens, Vocabulary, CONTINUATION_MARKER};
pub use words::{char_slice, CharIndex};

#[derive(Debug, Error)]
pub enum TextError {
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("external normalizer `{command}` failed: {reason}")]
    ExternalNormalizerFailure { command: String, reason: String },
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}
