//! Run configuration: defaults, a flat `key = value` file, and echo.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::chunking::ChunkingConfig;
use crate::corpus::AnnotateConfig;
use crate::extraction::ExtractionConfig;
use crate::model::EncoderConfig;
use crate::text::{CommandNormalizer, IdentityNormalizer, Normalizer, PorterNormalizer};
use crate::training::TrainingConfig;

/// Every setting of a CLI run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub val_dataset: Option<PathBuf>,
    pub test_dataset: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub chunking: ChunkingConfig,
    pub encoder: EncoderConfig,
    pub training: TrainingConfig,
    pub extraction: ExtractionConfig,
    pub annotate: AnnotateConfig,
    /// `porter`, `identity`, or `command:<program and args>`.
    pub normalizer: String,
    pub seed: u64,
    pub log_level: String,
    pub sweep_windows: Vec<usize>,
    pub sweep_queries: Vec<bool>,
    pub sweep_seeds: Vec<u64>,
    /// Headline strings for the context statistics of `stats`.
    pub headlines: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            val_dataset: None,
            test_dataset: None,
            vocab: None,
            checkpoint: None,
            predictions: None,
            out: None,
            chunking: ChunkingConfig::default(),
            encoder: EncoderConfig::default(),
            training: TrainingConfig::default(),
            extraction: ExtractionConfig { top_k: 5, ..Default::default() },
            annotate: AnnotateConfig::default(),
            normalizer: "porter".into(),
            seed: 0,
            log_level: "info".into(),
            sweep_windows: vec![1, 2, 4, 8],
            sweep_queries: vec![false, true],
            sweep_seeds: vec![0, 1, 2, 3, 4],
            headlines: Vec::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: Display,
{
    value.parse().map_err(|e| format!("invalid value {value:?} for `{key}`: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(format!("invalid value {value:?} for `{key}`: expected true or false")),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String>
where
    T::Err: Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Config keys with a one-line description, in echo order.
pub const KEYS: &[(&str, &str)] = &[
    ("dataset", "input dataset (training set for train and sweep)"),
    ("val_dataset", "validation dataset for model selection; defaults to the training set"),
    ("test_dataset", "test dataset scored by sweep"),
    ("vocab", "vocabulary file, one entry per line"),
    ("checkpoint", "model checkpoint to read (extract) or resume from (train)"),
    ("predictions", "prediction file scored by eval"),
    ("out", "output directory"),
    ("window_sentences", "sentences per context"),
    ("with_query", "prefix each context with the document title"),
    ("max_input_size", "maximum input length in tokens, specials included"),
    ("max_window_words", "longest body window, in words, matched against a keyphrase"),
    ("num_layers", "encoder layers"),
    ("hidden_size", "encoder width"),
    ("num_heads", "attention heads"),
    ("ffn_size", "feed-forward inner width"),
    ("dropout_rate", "dropout probability during training"),
    ("init_std", "standard deviation of the weight initializer"),
    ("layer_norm_eps", "layer-norm epsilon"),
    ("shared_bias", "one bias for both span heads"),
    ("learning_rate", "AdamW learning rate"),
    ("weight_decay", "AdamW decoupled weight decay"),
    ("beta1", "AdamW first-moment decay"),
    ("beta2", "AdamW second-moment decay"),
    ("epsilon", "AdamW denominator epsilon"),
    ("batch_size", "contexts per update"),
    ("eval_interval_steps", "steps between validations"),
    ("patience", "non-improving validations before stopping"),
    ("max_steps", "training step limit"),
    ("selection_metric", "val_loss or f1_at_k"),
    ("max_grad_norm", "clip gradients above this global norm; empty disables"),
    ("top_k", "keyphrases kept per document and k of F1@k"),
    ("max_span_tokens", "longest candidate span in subword tokens"),
    ("merge", "duplicate merge: max, sum or mean"),
    ("normalizer", "porter, identity, or command:<program>"),
    ("seed", "seed for initialization, shuffling and dropout"),
    ("log_level", "log level unless QBEK_LOG is set"),
    ("sweep_windows", "comma-separated window sizes"),
    ("sweep_queries", "comma-separated query settings (true,false)"),
    ("sweep_seeds", "comma-separated seeds"),
    ("headlines", "comma-separated headline strings for context statistics"),
];

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "dataset" => self.dataset = opt_path(v),
            "val_dataset" => self.val_dataset = opt_path(v),
            "test_dataset" => self.test_dataset = opt_path(v),
            "vocab" => self.vocab = opt_path(v),
            "checkpoint" => self.checkpoint = opt_path(v),
            "predictions" => self.predictions = opt_path(v),
            "out" => self.out = opt_path(v),
            "window_sentences" => self.chunking.window_sentences = parse(key, v)?,
            "with_query" => self.chunking.with_query = parse_bool(key, v)?,
            "max_input_size" => self.chunking.max_input_size = parse(key, v)?,
            "max_window_words" => self.annotate.max_window_words = parse(key, v)?,
            "num_layers" => self.encoder.num_layers = parse(key, v)?,
            "hidden_size" => self.encoder.hidden_size = parse(key, v)?,
            "num_heads" => self.encoder.num_heads = parse(key, v)?,
            "ffn_size" => self.encoder.ffn_size = parse(key, v)?,
            "dropout_rate" => self.encoder.dropout_rate = parse(key, v)?,
            "init_std" => self.encoder.init_std = parse(key, v)?,
            "layer_norm_eps" => self.encoder.layer_norm_eps = parse(key, v)?,
            "shared_bias" => self.encoder.shared_bias = parse_bool(key, v)?,
            "learning_rate" => self.training.optimizer.learning_rate = parse(key, v)?,
            "weight_decay" => self.training.optimizer.weight_decay = parse(key, v)?,
            "beta1" => self.training.optimizer.beta1 = parse(key, v)?,
            "beta2" => self.training.optimizer.beta2 = parse(key, v)?,
            "epsilon" => self.training.optimizer.epsilon = parse(key, v)?,
            "batch_size" => self.training.batch_size = parse(key, v)?,
            "eval_interval_steps" => self.training.eval_interval_steps = parse(key, v)?,
            "patience" => self.training.patience = parse(key, v)?,
            "max_steps" => self.training.max_steps = parse(key, v)?,
            "selection_metric" => self.training.selection_metric = parse(key, v)?,
            "max_grad_norm" => self.training.max_grad_norm = if v.is_empty() { None } else { Some(parse(key, v)?) },
            "top_k" => self.extraction.top_k = parse(key, v)?,
            "max_span_tokens" => self.extraction.max_span_tokens = parse(key, v)?,
            "merge" => self.extraction.merge = parse(key, v)?,
            "normalizer" => self.normalizer = v.to_string(),
            "seed" => self.seed = parse(key, v)?,
            "log_level" => self.log_level = v.to_string(),
            "sweep_windows" => self.sweep_windows = parse_list(key, v)?,
            "sweep_queries" => {
                self.sweep_queries = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_bool(key, s)).collect::<Result<_, _>>()?
            }
            "sweep_seeds" => self.sweep_seeds = parse_list(key, v)?,
            "headlines" => self.headlines = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
            _ => return Err(format!("unknown config key `{key}`")),
        }
        Ok(())
    }

    /// Applies a config file; errors name the line and key.
    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
            self.set(key.trim(), value).map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        self.apply_text(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    fn value(&self, key: &str) -> String {
        let t = &self.training;
        let e = &self.encoder;
        match key {
            "dataset" => show_path(&self.dataset),
            "val_dataset" => show_path(&self.val_dataset),
            "test_dataset" => show_path(&self.test_dataset),
            "vocab" => show_path(&self.vocab),
            "checkpoint" => show_path(&self.checkpoint),
            "predictions" => show_path(&self.predictions),
            "out" => show_path(&self.out),
            "window_sentences" => self.chunking.window_sentences.to_string(),
            "with_query" => self.chunking.with_query.to_string(),
            "max_input_size" => self.chunking.max_input_size.to_string(),
            "max_window_words" => self.annotate.max_window_words.to_string(),
            "num_layers" => e.num_layers.to_string(),
            "hidden_size" => e.hidden_size.to_string(),
            "num_heads" => e.num_heads.to_string(),
            "ffn_size" => e.ffn_size.to_string(),
            "dropout_rate" => e.dropout_rate.to_string(),
            "init_std" => e.init_std.to_string(),
            "layer_norm_eps" => e.layer_norm_eps.to_string(),
            "shared_bias" => e.shared_bias.to_string(),
            "learning_rate" => t.optimizer.learning_rate.to_string(),
            "weight_decay" => t.optimizer.weight_decay.to_string(),
            "beta1" => t.optimizer.beta1.to_string(),
            "beta2" => t.optimizer.beta2.to_string(),
            "epsilon" => t.optimizer.epsilon.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "eval_interval_steps" => t.eval_interval_steps.to_string(),
            "patience" => t.patience.to_string(),
            "max_steps" => t.max_steps.to_string(),
            "selection_metric" => t.selection_metric.to_string(),
            "max_grad_norm" => t.max_grad_norm.map(|v| v.to_string()).unwrap_or_default(),
            "top_k" => self.extraction.top_k.to_string(),
            "max_span_tokens" => self.extraction.max_span_tokens.to_string(),
            "merge" => self.extraction.merge.to_string(),
            "normalizer" => self.normalizer.clone(),
            "seed" => self.seed.to_string(),
            "log_level" => self.log_level.clone(),
            "sweep_windows" => join(&self.sweep_windows),
            "sweep_queries" => join(&self.sweep_queries),
            "sweep_seeds" => join(&self.sweep_seeds),
            "headlines" => self.headlines.join(","),
            _ => unreachable!("unlisted key {key}"),
        }
    }

    /// The effective configuration in config-file syntax.
    pub fn to_text(&self) -> String {
        KEYS.iter().map(|(k, _)| format!("{k} = {}\n", self.value(k))).collect()
    }

    /// Checks value ranges; the encoder's vocabulary size is filled in later.
    pub fn validate(&self) -> Result<(), String> {
        self.chunking.validate().map_err(|e| e.to_string())?;
        self.training.validate().map_err(|e| e.to_string())?;
        self.extraction.validate().map_err(|e| e.to_string())?;
        let enc = EncoderConfig { vocab_size: 1, ..self.encoder_config(1) };
        enc.validate().map_err(|e| e.to_string())?;
        if self.annotate.max_window_words == 0 {
            return Err("max_window_words must be positive".into());
        }
        self.build_normalizer().map(|_| ())
    }

    /// Encoder config for a vocabulary, seeded and sized from this run.
    pub fn encoder_config(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig { vocab_size, max_positions: self.chunking.max_input_size, seed: self.seed, ..self.encoder.clone() }
    }

    pub fn training_config(&self) -> TrainingConfig {
        TrainingConfig { seed: self.seed, eval_top_k: self.extraction.top_k, ..self.training.clone() }
    }

    pub fn build_normalizer(&self) -> Result<Box<dyn Normalizer>, String> {
        match self.normalizer.as_str() {
            "porter" => Ok(Box::new(PorterNormalizer)),
            "identity" => Ok(Box::new(IdentityNormalizer)),
            other => match other.strip_prefix("command:").and_then(CommandNormalizer::parse) {
                Some(cmd) => Ok(Box::new(cmd)),
                None => Err(format!("invalid normalizer {other:?}")),
            },
        }
    }
}
