//! Transformer encoder with sigmoid start/end span heads, loss and exact
//! gradients.

mod config;
mod encoder;
mod head;
mod params;
mod tensor;


use thiserror::Error;

pub use config::EncoderConfig;
pub use head::{loss, sigmoid, span_score, token_probabilities, TokenProbabilities, LOSS_EPSILON};
pub use params::{LayerParams, ModelParams};
pub use tensor::{dot, Matrix};

use crate::chunking::Context;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid span ({0}, {1})")]
    InvalidSpan(usize, usize),
    #[error("no valid positions to score")]
    NoValidPositions,
    #[error("context has no training targets")]
    MissingTargets,
}

/// Token, segment ids and the number of non-PAD positions.
#[derive(Debug, Clone, Copy)]
pub struct EncoderInput<'a> {
    pub ids: &'a [u32],
    pub segments: &'a [u8],
    /// Positions at or past this index are PAD and masked as attention keys.
    pub valid_len: usize,
}

impl<'a> EncoderInput<'a> {
    pub fn from_context(ctx: &'a Context) -> Self {
        Self { ids: &ctx.input_ids, segments: &ctx.segment_ids, valid_len: ctx.layout.len }
    }
}

/// Contextual token representations, one row per input position.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence<T> {
    pub hidden: Matrix<T>,
}

/// Encoder plus span head.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanModel<T> {
    pub config: EncoderConfig,
    pub params: ModelParams<T>,
}

impl<T: Scalar> SpanModel<T> {
    /// Randomly initialized model seeded from `config.seed`.
    pub fn new(config: EncoderConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let params = ModelParams::init(&config);
        Ok(Self { config, params })
    }

    pub fn from_params(config: EncoderConfig, params: ModelParams<T>) -> Result<Self, ModelError> {
        config.validate()?;
        let expected = ModelParams::<T>::zeros(&config);
        for ((a, b), name) in params.tensors().iter().zip(expected.tensors()).zip(ModelParams::<T>::names(config.num_layers)) {
            if a.shape() != b.shape() {
                return Err(ModelError::ShapeMismatch(format!("{name}: {:?} vs {:?}", a.shape(), b.shape())));
            }
        }
        if params.layers.len() != config.num_layers {
            return Err(ModelError::ShapeMismatch("layer count".into()));
        }
        Ok(Self { config, params })
    }

    /// Runs the encoder; dropout is applied only when `dropout_seed` is set.
    pub fn encode(&self, input: EncoderInput<'_>, dropout_seed: Option<u64>) -> Result<EncodedSequence<T>, ModelError> {
        encoder::check_input(&self.config, &input)?;
        let (hidden, _) = encoder::forward(&self.config, &self.params, &input, dropout_seed);
        Ok(EncodedSequence { hidden })
    }

    /// Eval-mode start/end probabilities of a context.
    pub fn probabilities(&self, ctx: &Context) -> Result<TokenProbabilities<T>, ModelError> {
        let enc = self.encode(EncoderInput::from_context(ctx), None)?;
        Ok(token_probabilities(&enc.hidden, &self.params, ctx.valid_mask(), self.config.shared_bias))
    }

    /// Eval-mode loss of a context against its targets.
    pub fn loss(&self, ctx: &Context) -> Result<T, ModelError> {
        let t = ctx.targets.as_ref().ok_or(ModelError::MissingTargets)?;
        loss(&self.probabilities(ctx)?, &t.start, &t.end)
    }

    /// Loss times `loss_scale` and its gradient with respect to every
    /// parameter. `dropout_seed` enables train-mode dropout.
    pub fn loss_and_gradients(
        &self,
        ctx: &Context,
        dropout_seed: Option<u64>,
        loss_scale: T,
    ) -> Result<(T, ModelParams<T>), ModelError> {
        let t = ctx.targets.as_ref().ok_or(ModelError::MissingTargets)?;
        self.loss_and_gradients_raw(EncoderInput::from_context(ctx), &ctx.valid_mask(), &t.start, &t.end, dropout_seed, loss_scale)
    }

    /// As [`SpanModel::loss_and_gradients`] on explicit inputs.
    pub fn loss_and_gradients_raw(
        &self,
        input: EncoderInput<'_>,
        valid: &[bool],
        start: &[u8],
        end: &[u8],
        dropout_seed: Option<u64>,
        loss_scale: T,
    ) -> Result<(T, ModelParams<T>), ModelError> {
        encoder::check_input(&self.config, &input)?;
        if valid.len() != input.ids.len() {
            return Err(ModelError::ShapeMismatch("valid mask length".into()));
        }
        let shared = self.config.shared_bias;
        let (hidden, cache) = encoder::forward(&self.config, &self.params, &input, dropout_seed);
        let probs = token_probabilities(&hidden, &self.params, valid.to_vec(), shared);
        let value = loss(&probs, start, end)? * loss_scale;
        let (mut ds, mut de) = head::loss_logit_grads(&probs, start, end)?;
        for x in ds.iter_mut().chain(de.iter_mut()) {
            *x = *x * loss_scale;
        }
        let mut grads = ModelParams::zeros(&self.config);
        let d_enc = head::head_backward(&hidden, &self.params, &ds, &de, &mut grads, shared);
        encoder::backward(&self.params, &cache, d_enc, &mut grads, self.config.num_heads);
        Ok((value, grads))
    }
}
