//! The `qbek` command line: annotate, stats, train, extract, eval, sweep.

mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

pub use config::{RunConfig, KEYS};

use crate::chunking::{headline_stats, saturation_stats, ChunkingConfig, Mode};
use crate::corpus::{dataset_stats, parse_dataset, write_dataset, Document};
use crate::evaluation::{sweep_report, SweepRun};
use crate::extraction::{read_predictions, write_predictions};
use crate::model::SpanModel;
use crate::pipeline::{
    annotate_corpus, corpus_contexts, evaluate_predictions, extract_corpus, run_sweep_cell, training_contexts,
    validation_set, CellSettings, SweepData,
};
use crate::text::{Normalizer, SpecialTokens, Vocabulary};
use crate::training::{load_checkpoint, save_checkpoint, train, TrainStart, TrainingError};

/// Effective config file written into every output directory.
pub const CONFIG_ECHO: &str = "config.txt";

#[derive(Debug, Parser)]
#[command(name = "qbek", version, about = "Query-based keyphrase extraction from long documents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Locate gold keyphrases in the body text and write an annotated dataset.
    Annotate(CommonArgs),
    /// Print dataset and context statistics.
    Stats(CommonArgs),
    /// Train a model and write the best checkpoint.
    Train(CommonArgs),
    /// Write top-k keyphrase predictions for a dataset.
    Extract(CommonArgs),
    /// Score predictions against gold keyphrases with F1@k.
    Eval(CommonArgs),
    /// Train and evaluate over window sizes, query settings and seeds.
    Sweep(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    val_dataset: Option<PathBuf>,
    #[arg(long)]
    test_dataset: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long)]
    window_sentences: Option<usize>,
    /// Prefix each context with the document title.
    #[arg(long, overrides_with = "no_query")]
    with_query: bool,
    #[arg(long, overrides_with = "with_query")]
    no_query: bool,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    max_input_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with its exit code: 1 for data and run errors, 2 for usage and
/// configuration errors.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Data(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) | Self::Data(m) => f.write_str(m),
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

impl CommonArgs {
    fn into_config(self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            require_file(path, "config")?;
            cfg.apply_file(path).map_err(CliError::Usage)?;
        }
        let paths = [
            (self.dataset, &mut cfg.dataset),
            (self.val_dataset, &mut cfg.val_dataset),
            (self.test_dataset, &mut cfg.test_dataset),
            (self.vocab, &mut cfg.vocab),
            (self.checkpoint, &mut cfg.checkpoint),
            (self.predictions, &mut cfg.predictions),
            (self.out, &mut cfg.out),
        ];
        for (flag, slot) in paths {
            if flag.is_some() {
                *slot = flag;
            }
        }
        if let Some(w) = self.window_sentences {
            cfg.chunking.window_sentences = w;
        }
        if self.with_query {
            cfg.chunking.with_query = true;
        }
        if self.no_query {
            cfg.chunking.with_query = false;
        }
        if let Some(k) = self.top_k {
            cfg.extraction.top_k = k;
        }
        if let Some(m) = self.max_input_size {
            cfg.chunking.max_input_size = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate().map_err(CliError::Usage)?;
        Ok(cfg)
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} file not found: {}", path.display())))
    }
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    let p = path.as_deref().ok_or_else(|| CliError::Usage(format!("missing --{what}")))?;
    require_file(p, what)?;
    Ok(p)
}

fn optional(path: &Option<PathBuf>, what: &str) -> Result<Option<PathBuf>, CliError> {
    if let Some(p) = path {
        require_file(p, what)?;
    }
    Ok(path.clone())
}

fn load_docs(path: &Path) -> Result<Vec<Document>, CliError> {
    parse_dataset(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn output_dir(cfg: &RunConfig) -> Result<Option<PathBuf>, CliError> {
    match &cfg.out {
        None => Ok(None),
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
            write_file(&dir.join(CONFIG_ECHO), &cfg.to_text())?;
            Ok(Some(dir.clone()))
        }
    }
}

fn require_out(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    output_dir(cfg)?.ok_or_else(|| CliError::Usage("missing --out".into()))
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn corpus_texts(docs: &[Document]) -> Vec<&str> {
    docs.iter()
        .flat_map(|d| std::iter::once(d.body.as_str()).chain(d.query.as_deref()))
        .collect()
}

fn load_vocab(path: &Path) -> Result<Vocabulary, CliError> {
    Vocabulary::from_file(path, &SpecialTokens::default()).map_err(data)
}

/// The configured vocabulary, or one built from `docs`.
fn vocab_for(cfg: &RunConfig, docs: &[Document]) -> Result<Vocabulary, CliError> {
    match optional(&cfg.vocab, "vocab")? {
        Some(p) => load_vocab(&p),
        None => Ok(Vocabulary::from_corpus(corpus_texts(docs), &SpecialTokens::default())),
    }
}

fn cmd_annotate(cfg: &RunConfig, normalizer: &dyn Normalizer) -> Result<(), CliError> {
    let docs = load_docs(required(&cfg.dataset, "dataset")?)?;
    let out = require_out(cfg)?;
    let spans = annotate_corpus(&docs, normalizer, cfg.annotate).map_err(data)?;
    write_dataset(out.join("annotated.jsonl"), &docs, Some(&spans)).map_err(data)?;
    let stats = dataset_stats(&docs, &spans).to_string();
    write_file(&out.join("stats.txt"), &format!("{stats}\n"))?;
    println!("{stats}");
    Ok(())
}

fn cmd_stats(cfg: &RunConfig, normalizer: &dyn Normalizer) -> Result<(), CliError> {
    let docs = load_docs(required(&cfg.dataset, "dataset")?)?;
    let spans = annotate_corpus(&docs, normalizer, cfg.annotate).map_err(data)?;
    let vocab = vocab_for(cfg, &docs)?;
    let infer = ChunkingConfig { mode: Mode::Infer, ..cfg.chunking.clone() };
    let contexts = corpus_contexts(&docs, None, &infer, &vocab).flatten();
    let mut text = dataset_stats(&docs, &spans).to_string();
    write!(
        text,
        "\ncontexts (window {}, query {}): {}\nsaturation (max input {}): {:.4}\nheadline contexts: {:.4}",
        infer.window_sentences,
        infer.with_query,
        contexts.len(),
        infer.max_input_size,
        saturation_stats(&docs, &infer, &vocab),
        headline_stats(&contexts, &cfg.headlines)
    )
    .unwrap();
    if let Some(out) = output_dir(cfg)? {
        write_file(&out.join("stats.txt"), &format!("{text}\n"))?;
    }
    println!("{text}");
    Ok(())
}

fn training_error(e: TrainingError) -> CliError {
    match e {
        TrainingError::InvalidConfig(_) => usage(e),
        other => data(other),
    }
}

fn cmd_train(cfg: &RunConfig, normalizer: &dyn Normalizer) -> Result<(), CliError> {
    let docs = load_docs(required(&cfg.dataset, "dataset")?)?;
    let val_docs = match optional(&cfg.val_dataset, "val_dataset")? {
        Some(p) => load_docs(&p)?,
        None => {
            warn!("no val_dataset given; validating on the training set");
            docs.clone()
        }
    };
    let resume = optional(&cfg.checkpoint, "checkpoint")?;
    let out = require_out(cfg)?;
    if docs.is_empty() {
        return Err(data(TrainingError::EmptyDataset));
    }
    let vocab = vocab_for(cfg, &docs)?;
    let spans = annotate_corpus(&docs, normalizer, cfg.annotate).map_err(data)?;
    let val_spans = annotate_corpus(&val_docs, normalizer, cfg.annotate).map_err(data)?;
    let contexts = training_contexts(&docs, &spans, &cfg.chunking, &vocab);
    info!(
        "{} training contexts; {} gold spans dropped at window boundaries",
        contexts.documents.iter().map(Vec::len).sum::<usize>(),
        contexts.dropped_spans
    );
    let val = validation_set(&val_docs, &val_spans, &cfg.chunking, &vocab);
    let start = match resume {
        Some(path) => {
            let ckpt = load_checkpoint::<f64>(&path, Some(&vocab.hash())).map_err(data)?;
            if ckpt.config != cfg.encoder_config(vocab.len()) {
                warn!("resuming with the encoder config stored in {}", path.display());
            }
            TrainStart::resume(ckpt).map_err(training_error)?
        }
        None => TrainStart::fresh(SpanModel::new(cfg.encoder_config(vocab.len())).map_err(usage)?),
    };
    let outcome =
        train(start, &contexts.flatten(), &val, &cfg.training_config(), normalizer, &vocab.hash()).map_err(training_error)?;
    vocab.write(out.join("vocab.txt")).map_err(data)?;
    save_checkpoint(out.join("model.ckpt"), &outcome.best).map_err(data)?;
    write_file(&out.join("train_log.csv"), &outcome.log.to_csv())?;
    println!(
        "best checkpoint at step {} ({} steps run{})",
        outcome.best.step,
        outcome.last_step,
        if outcome.stopped_early { ", stopped early" } else { "" }
    );
    Ok(())
}

fn cmd_extract(cfg: &RunConfig, normalizer: &dyn Normalizer) -> Result<(), CliError> {
    let docs = load_docs(required(&cfg.dataset, "dataset")?)?;
    let ckpt_path = required(&cfg.checkpoint, "checkpoint")?;
    let vocab_path = match &cfg.vocab {
        Some(p) => p.clone(),
        None => ckpt_path.with_file_name("vocab.txt"),
    };
    require_file(&vocab_path, "vocab")?;
    let out = require_out(cfg)?;
    let vocab = load_vocab(&vocab_path)?;
    let ckpt = load_checkpoint::<f64>(ckpt_path, Some(&vocab.hash())).map_err(data)?;
    if ckpt.config.max_positions < cfg.chunking.max_input_size {
        return Err(CliError::Usage(format!(
            "max_input_size {} exceeds the checkpoint's {} positions",
            cfg.chunking.max_input_size, ckpt.config.max_positions
        )));
    }
    let model = SpanModel::from_params(ckpt.config, ckpt.params).map_err(data)?;
    let (predictions, missing) =
        extract_corpus(&docs, &model, &cfg.chunking, &cfg.extraction, &vocab, normalizer).map_err(data)?;
    if missing > 0 {
        warn!("{missing} of {} documents have no title to use as query", docs.len());
    }
    let mut buf = Vec::new();
    write_predictions(&mut buf, &predictions).map_err(data)?;
    fs::write(out.join("predictions.jsonl"), buf).map_err(data)?;
    println!("wrote predictions for {} documents", predictions.len());
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, normalizer: &dyn Normalizer) -> Result<(), CliError> {
    let pred_path = required(&cfg.predictions, "predictions")?;
    let docs = load_docs(required(&cfg.dataset, "dataset")?)?;
    let text = fs::read_to_string(pred_path).map_err(data)?;
    let predictions =
        read_predictions(&text).map_err(|(line, e)| data(format!("{}: line {line}: {e}", pred_path.display())))?;
    let report = evaluate_predictions(&predictions, &docs, cfg.extraction.top_k, normalizer).map_err(data)?;
    if let Some(out) = output_dir(cfg)? {
        write_file(&out.join("report.txt"), &format!("{report}\n"))?;
        write_file(&out.join("report.csv"), &report.to_csv())?;
        write_file(&out.join("documents.csv"), &report.documents_csv())?;
    }
    println!("{report}");
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, normalizer: &dyn Normalizer) -> Result<(), CliError> {
    let train_docs = load_docs(required(&cfg.dataset, "dataset")?)?;
    let val_docs = match optional(&cfg.val_dataset, "val_dataset")? {
        Some(p) => load_docs(&p)?,
        None => train_docs.clone(),
    };
    let test_docs = match optional(&cfg.test_dataset, "test_dataset")? {
        Some(p) => load_docs(&p)?,
        None => {
            warn!("no test_dataset given; scoring on the validation set");
            val_docs.clone()
        }
    };
    if cfg.sweep_windows.is_empty() || cfg.sweep_queries.is_empty() || cfg.sweep_seeds.is_empty() {
        return Err(CliError::Usage("sweep_windows, sweep_queries and sweep_seeds must be non-empty".into()));
    }
    let out = require_out(cfg)?;
    let vocab = vocab_for(cfg, &train_docs)?;
    let train_spans = annotate_corpus(&train_docs, normalizer, cfg.annotate).map_err(data)?;
    let val_spans = annotate_corpus(&val_docs, normalizer, cfg.annotate).map_err(data)?;

    let mut saturation = String::from("window_sentences,with_query,saturation\n");
    for &w in &cfg.sweep_windows {
        for &q in &cfg.sweep_queries {
            let c = ChunkingConfig { window_sentences: w, with_query: q, mode: Mode::Infer, ..cfg.chunking.clone() };
            c.validate().map_err(usage)?;
            writeln!(saturation, "{w},{q},{}", saturation_stats(&test_docs, &c, &vocab)).unwrap();
        }
    }
    write_file(&out.join("saturation.csv"), &saturation)?;

    let data_set = SweepData {
        train_docs: &train_docs,
        train_spans: &train_spans,
        val_docs: &val_docs,
        val_spans: &val_spans,
        test_docs: &test_docs,
        vocab: &vocab,
        normalizer,
    };
    let settings = CellSettings {
        chunking: cfg.chunking.clone(),
        encoder: cfg.encoder.clone(),
        training: cfg.training_config(),
        extraction: cfg.extraction.clone(),
    };
    let mut runs = Vec::new();
    let mut failures = String::from("window_sentences,with_query,seed,error\n");
    let mut failed = 0;
    for &w in &cfg.sweep_windows {
        for &q in &cfg.sweep_queries {
            for &seed in &cfg.sweep_seeds {
                info!("sweep cell: window {w}, query {q}, seed {seed}");
                match run_sweep_cell::<f64>(&data_set, &settings, w, q, seed) {
                    Ok(cell) => {
                        let dir = out.join("cells").join(format!("w{w}-q{}-s{seed}", u8::from(q)));
                        fs::create_dir_all(&dir).map_err(data)?;
                        write_file(&dir.join("train_log.csv"), &cell.log.to_csv())?;
                        let mut buf = Vec::new();
                        write_predictions(&mut buf, &cell.predictions).map_err(data)?;
                        fs::write(dir.join("predictions.jsonl"), buf).map_err(data)?;
                        runs.push(SweepRun { window_sentences: w, with_query: q, seed, report: cell.report });
                    }
                    Err(e) => {
                        error!("sweep cell window {w}, query {q}, seed {seed} failed: {e}");
                        failed += 1;
                        let msg = e.to_string().replace(['\n', ','], " ");
                        writeln!(failures, "{w},{q},{seed},{msg}").unwrap();
                    }
                }
                let (rows, summary) = sweep_report(&runs);
                write_file(&out.join("sweep.csv"), &rows)?;
                write_file(&out.join("summary.csv"), &summary)?;
                write_file(&out.join("failures.csv"), &failures)?;
            }
        }
    }
    print!("{}", sweep_report(&runs).1);
    if failed > 0 {
        return Err(CliError::Data(format!("{failed} sweep cells failed; see failures.csv")));
    }
    Ok(())
}

fn init_logging(level: &str) {
    let env = env_logger::Env::new().filter_or("QBEK_LOG", level);
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    type Handler = fn(&RunConfig, &dyn Normalizer) -> Result<(), CliError>;
    let (handler, common): (Handler, CommonArgs) = match cli.command {
        Command::Annotate(a) => (cmd_annotate, a),
        Command::Stats(a) => (cmd_stats, a),
        Command::Train(a) => (cmd_train, a),
        Command::Extract(a) => (cmd_extract, a),
        Command::Eval(a) => (cmd_eval, a),
        Command::Sweep(a) => (cmd_sweep, a),
    };
    let result = common.into_config().and_then(|cfg| {
        init_logging(&cfg.log_level);
        let normalizer = cfg.build_normalizer().map_err(CliError::Usage)?;
        handler(&cfg, normalizer.as_ref())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
