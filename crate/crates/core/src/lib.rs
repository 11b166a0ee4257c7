//! Query-based keyphrase extraction for long documents.
//!
//! Documents are split into windows of sentences, optionally prefixed with
//! the title as a query, and encoded by a small transformer whose sigmoid
//! heads give per-token start and end probabilities. Span scores are merged
//! across a document's windows into a ranked keyphrase list scored by F1@k.
//!
//! The numeric core is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix double precision, which training uses.

pub mod chunking;
pub mod cli;
pub mod corpus;
pub mod evaluation;
pub mod extraction;
pub mod model;
pub mod pipeline;
pub mod scalar;
pub mod synthetic;
pub mod text;
pub mod training;

pub type Model = model::SpanModel<f64>;
pub type ModelF32 = model::SpanModel<f32>;
pub type Params = model::ModelParams<f64>;
pub type Probabilities = model::TokenProbabilities<f64>;
pub type Checkpoint = training::Checkpoint<f64>;
pub type Keyphrase = extraction::KeyphraseResult<f64>;
