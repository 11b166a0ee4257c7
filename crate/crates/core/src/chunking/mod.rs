//! Context assembly: sentence windows, optional query prefix, and the
//! span-preserving split of over-long inputs.

mod context;
mod split;

use thiserror::Error;

pub use context::{
    build_contexts, headline_stats, saturation_stats, sentence_windows, ChunkedDocument, ChunkingConfig, Context,
    Layout, Mode, Targets,
};
pub use split::{legal_cuts, split_overlong, SplitPlan};

#[derive(Debug, Error)]
pub enum ChunkingError {
    #[error("invalid chunking config: {0}")]
    InvalidConfig(String),
}

#[cfg(test)]
mod tests;
