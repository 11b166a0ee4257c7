//! Mini-batch AdamW training with periodic validation, early stopping and
//! checkpoints.

mod checkpoint;
mod optimizer;

#[cfg(test)]
mod tests;

use std::collections::HashMap;
use std::fmt::Write as _;

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, FORMAT_VERSION, MAGIC};
pub use optimizer::{adamw_step, AdamWConfig, EarlyStopping, Observation, OptimizerState};

use crate::chunking::Context;
use crate::evaluation::{f1_at_k, EvalError};
use crate::extraction::{extract_document, ExtractionConfig, ExtractionError};
use crate::model::{ModelError, ModelParams, SpanModel};
use crate::scalar::Scalar;
use crate::text::Normalizer;

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Validation quantity used for early stopping and best-checkpoint selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    #[default]
    ValLoss,
    F1AtK,
}

impl SelectionMetric {
    pub fn higher_is_better(self) -> bool {
        self == Self::F1AtK
    }
}

impl std::str::FromStr for SelectionMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "val_loss" => Ok(Self::ValLoss),
            "f1_at_k" => Ok(Self::F1AtK),
            other => Err(format!("unknown selection metric {other:?} (expected val_loss or f1_at_k)")),
        }
    }
}

impl std::fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ValLoss => "val_loss",
            Self::F1AtK => "f1_at_k",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub optimizer: AdamWConfig,
    pub batch_size: usize,
    pub eval_interval_steps: u64,
    pub patience: usize,
    pub max_steps: u64,
    pub seed: u64,
    pub selection_metric: SelectionMetric,
    /// k of the F1@k selection metric.
    pub eval_top_k: usize,
    /// Rescale gradients whose global norm exceeds this value.
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            optimizer: AdamWConfig::default(),
            batch_size: 16,
            eval_interval_steps: 100,
            patience: 3,
            max_steps: 2000,
            seed: 0,
            selection_metric: SelectionMetric::ValLoss,
            eval_top_k: 5,
            max_grad_norm: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: &str| Err(TrainingError::InvalidConfig(m.into()));
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && o.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
            return bad("beta1 and beta2 must be in [0, 1)");
        }
        if o.epsilon.is_nan() || o.epsilon <= 0.0 || o.weight_decay.is_nan() || o.weight_decay < 0.0 {
            return bad("epsilon must be positive and weight_decay non-negative");
        }
        if self.batch_size == 0 || self.patience == 0 || self.eval_interval_steps == 0 || self.eval_top_k == 0 {
            return bad("batch_size, patience, eval_interval_steps and eval_top_k must be positive");
        }
        if matches!(self.max_grad_norm, Some(n) if n.is_nan() || n <= 0.0) {
            return bad("max_grad_norm must be positive");
        }
        Ok(())
    }
}

/// A validation document: inference contexts plus gold keyphrases.
#[derive(Debug, Clone)]
pub struct ValidationDocument {
    pub id: String,
    pub contexts: Vec<Context>,
    pub gold: Vec<String>,
}

/// Contexts with targets for the loss metric and documents for F1@k.
#[derive(Debug, Clone, Default)]
pub struct ValidationSet {
    pub loss_contexts: Vec<Context>,
    pub documents: Vec<ValidationDocument>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub step: u64,
    /// Mean batch loss since the previous evaluation.
    pub train_loss: f64,
    pub val_metric: f64,
    pub is_best: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,train_loss,val_metric,is_best\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.step, r.train_loss, r.val_metric, r.is_best).unwrap();
        }
        out
    }
}

/// Where training stopped and the best checkpoint seen.
#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub best: Checkpoint<T>,
    pub log: TrainLog,
    /// Steps taken in total, including those of a resumed run.
    pub last_step: u64,
    pub stopped_early: bool,
    pub skipped_steps: usize,
}

/// Mean loss over contexts that have at least one valid position.
pub fn validation_loss<T: Scalar>(model: &SpanModel<T>, contexts: &[Context]) -> Result<f64, TrainingError> {
    let losses = contexts
        .par_iter()
        .map(|c| match model.loss(c) {
            Ok(l) => Ok(Some(l.as_f64())),
            Err(ModelError::NoValidPositions) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let kept: Vec<f64> = losses.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(TrainingError::EmptyValidation);
    }
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Micro F1@k of the model's extractions on the validation documents.
pub fn validation_f1<T: Scalar>(
    model: &SpanModel<T>,
    docs: &[ValidationDocument],
    k: usize,
    normalizer: &dyn Normalizer,
) -> Result<f64, TrainingError> {
    if docs.is_empty() {
        return Err(TrainingError::EmptyValidation);
    }
    let cfg = ExtractionConfig { top_k: k, ..Default::default() };
    let mut predictions = Vec::with_capacity(docs.len());
    let mut golds = HashMap::new();
    for d in docs {
        let results = extract_document(&d.contexts, model, &cfg, normalizer)?;
        predictions.push((d.id.clone(), results.into_iter().map(|r| r.surface).collect::<Vec<_>>()));
        golds.insert(d.id.clone(), d.gold.clone());
    }
    Ok(f1_at_k(&predictions, &golds, k, normalizer)?.f1)
}

/// Order of training examples in `epoch`.
fn epoch_order(seed: u64, epoch: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

fn dropout_seed(seed: u64, step: u64, slot: usize) -> u64 {
    let mut x = seed ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (slot as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 31;
    x.wrapping_mul(0x94D0_49BB_1331_11EB)
}

/// Mean loss and summed gradients of one batch. Per-example gradients run in
/// parallel and are reduced in batch order.
fn batch_gradients<T: Scalar>(
    model: &SpanModel<T>,
    batch: &[&Context],
    seed: u64,
    step: u64,
) -> Result<(f64, ModelParams<T>), TrainingError> {
    let scale = T::one() / T::from_usize(batch.len()).unwrap();
    let dropout = model.config.dropout_rate > 0.0;
    let parts = batch
        .par_iter()
        .enumerate()
        .map(|(slot, ctx)| model.loss_and_gradients(ctx, dropout.then(|| dropout_seed(seed, step, slot)), scale))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = ModelParams::zeros(&model.config);
    let mut loss = 0.0;
    for (l, g) in parts {
        loss += l.as_f64();
        total.add_assign(&g);
    }
    Ok((loss, total))
}

/// Initial state for [`train`]; `resume` continues from a checkpoint with
/// optimizer moments and step counter.
pub struct TrainStart<T> {
    pub model: SpanModel<T>,
    pub optimizer: Option<OptimizerState<T>>,
    pub step: u64,
}

impl<T: Scalar> TrainStart<T> {
    pub fn fresh(model: SpanModel<T>) -> Self {
        Self { model, optimizer: None, step: 0 }
    }

    pub fn resume(ckpt: Checkpoint<T>) -> Result<Self, TrainingError> {
        let model = SpanModel::from_params(ckpt.config, ckpt.params)?;
        Ok(Self { model, optimizer: ckpt.optimizer, step: ckpt.step })
    }
}

/// Trains until `max_steps` or early stopping and returns the best
/// checkpoint by the selection metric. Training contexts must carry targets.
pub fn train<T: Scalar>(
    start: TrainStart<T>,
    train_set: &[Context],
    val: &ValidationSet,
    cfg: &TrainingConfig,
    normalizer: &dyn Normalizer,
    vocab_hash: &str,
) -> Result<TrainOutcome<T>, TrainingError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(TrainingError::EmptyDataset);
    }
    let metric_empty = match cfg.selection_metric {
        SelectionMetric::ValLoss => val.loss_contexts.is_empty(),
        SelectionMetric::F1AtK => val.documents.is_empty(),
    };
    if metric_empty {
        return Err(TrainingError::EmptyValidation);
    }
    let TrainStart { mut model, optimizer, step: first_step } = start;
    let mut opt = optimizer.unwrap_or_else(|| OptimizerState::new(&model.config));
    let evaluate = |m: &SpanModel<T>| match cfg.selection_metric {
        SelectionMetric::ValLoss => validation_loss(m, &val.loss_contexts),
        SelectionMetric::F1AtK => validation_f1(m, &val.documents, cfg.eval_top_k, normalizer),
    };

    let n = train_set.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size) as u64;
    let mut stopper = EarlyStopping::new(cfg.patience, cfg.selection_metric.higher_is_better());
    let mut log = TrainLog::default();
    let mut best: Option<Checkpoint<T>> = None;
    let mut order_epoch = u64::MAX;
    let mut order = Vec::new();
    let (mut loss_sum, mut loss_steps) = (0.0, 0usize);
    let mut skipped = 0;
    let mut step = first_step;
    let mut stopped_early = false;

    info!(
        "training on {n} contexts, batch {}, from step {first_step} to {}, selecting on {}",
        cfg.batch_size, cfg.max_steps, cfg.selection_metric
    );
    while step < cfg.max_steps {
        let epoch = step / steps_per_epoch;
        if epoch != order_epoch {
            order = epoch_order(cfg.seed, epoch, n);
            order_epoch = epoch;
        }
        let b = (step % steps_per_epoch) as usize * cfg.batch_size;
        let batch: Vec<&Context> = order[b..(b + cfg.batch_size).min(n)].iter().map(|&i| &train_set[i]).collect();
        let (loss, mut grads) = batch_gradients(&model, &batch, cfg.seed, step)?;
        if let Some(max) = cfg.max_grad_norm {
            let norm = grads.global_norm().as_f64();
            if norm > max {
                debug!("step {}: clipping gradient norm {norm:.4} to {max}", step + 1);
                grads.scale(T::lit(max / norm));
            }
        }
        match adamw_step(&mut model.params, &grads, &mut opt, &cfg.optimizer) {
            Ok(()) => {
                loss_sum += loss;
                loss_steps += 1;
            }
            Err(TrainingError::NonFiniteGradient) => {
                warn!("step {}: non-finite gradient, update skipped", step + 1);
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
        step += 1;

        if step % cfg.eval_interval_steps == 0 || step == cfg.max_steps {
            let metric = evaluate(&model)?;
            let train_loss = if loss_steps == 0 { f64::NAN } else { loss_sum / loss_steps as f64 };
            (loss_sum, loss_steps) = (0.0, 0);
            let obs = stopper.observe(step, metric);
            info!("step {step}: train_loss {train_loss:.6} {} {metric:.6}{}", cfg.selection_metric, if obs.is_best { " (best)" } else { "" });
            log.rows.push(LogRow { step, train_loss, val_metric: metric, is_best: obs.is_best });
            if obs.is_best {
                best = Some(Checkpoint {
                    config: model.config.clone(),
                    params: model.params.clone(),
                    optimizer: Some(opt.clone()),
                    vocab_hash: vocab_hash.to_string(),
                    step,
                });
            }
            if obs.stop {
                info!("stopping early at step {step}; best at step {}", stopper.best_step.unwrap_or(0));
                stopped_early = true;
                break;
            }
        }
    }
    let best = match best {
        Some(b) => b,
        None => {
            // Resumed at or past max_steps: evaluate the model as given.
            let metric = evaluate(&model)?;
            log.rows.push(LogRow { step, train_loss: f64::NAN, val_metric: metric, is_best: true });
            Checkpoint { config: model.config.clone(), params: model.params, optimizer: Some(opt), vocab_hash: vocab_hash.to_string(), step }
        }
    };
    Ok(TrainOutcome { best, log, last_step: step, stopped_early, skipped_steps: skipped })
}
