use super::*;
use crate::chunking::ChunkingConfig;
use crate::model::{EncoderConfig, Matrix};
use crate::pipeline::{annotate_corpus, training_contexts, validation_set};
use crate::synthetic::{generate_corpus, SyntheticConfig};
use crate::text::{PorterNormalizer, SpecialTokens, Vocabulary};

fn scalar_model(theta: f64) -> (EncoderConfig, ModelParams<f64>) {
    let cfg = EncoderConfig { num_layers: 1, hidden_size: 1, num_heads: 1, ffn_size: 1, vocab_size: 1, max_positions: 1, num_segments: 1, ..Default::default() };
    let mut p = ModelParams::zeros(&cfg);
    p.start_b = Matrix::filled(1, 1, theta);
    (cfg, p)
}

fn grad_on_start_bias(cfg: &EncoderConfig, g: f64) -> ModelParams<f64> {
    let mut grads = ModelParams::zeros(cfg);
    grads.start_b = Matrix::filled(1, 1, g);
    grads
}

#[test]
fn adamw_fixtures() {
    let (cfg, mut p) = scalar_model(1.0);
    let mut state = OptimizerState::new(&cfg);
    let opt = AdamWConfig { learning_rate: 0.1, weight_decay: 0.0, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 };
    adamw_step(&mut p, &grad_on_start_bias(&cfg, 0.0), &mut state, &opt).unwrap();
    assert_eq!(p.start_b.data[0], 1.0);

    let (cfg, mut p) = scalar_model(2.0);
    let mut state = OptimizerState::new(&cfg);
    let decay = AdamWConfig { weight_decay: 0.1, ..opt };
    adamw_step(&mut p, &grad_on_start_bias(&cfg, 0.0), &mut state, &decay).unwrap();
    assert!((p.start_b.data[0] - 0.99 * 2.0).abs() < 1e-15);

    let (cfg, mut p) = scalar_model(1.0);
    let mut state = OptimizerState::new(&cfg);
    adamw_step(&mut p, &grad_on_start_bias(&cfg, 1.0), &mut state, &opt).unwrap();
    // m = 0.1, v = 0.001; bias correction gives m_hat = v_hat = 1.
    assert!((p.start_b.data[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-12);
    assert_eq!(state.t, 1);
    assert!((state.m.start_b.data[0] - 0.1).abs() < 1e-15);
    assert!((state.v.start_b.data[0] - 0.001).abs() < 1e-15);
}

#[test]
fn non_finite_gradient_aborts_step() {
    let (cfg, mut p) = scalar_model(1.0);
    let mut state = OptimizerState::new(&cfg);
    let before = p.clone();
    let r = adamw_step(&mut p, &grad_on_start_bias(&cfg, f64::NAN), &mut state, &AdamWConfig::default());
    assert!(matches!(r, Err(TrainingError::NonFiniteGradient)));
    assert_eq!(p, before);
    assert_eq!(state.t, 0);
}

#[test]
fn early_stopping_patience() {
    let mut s = EarlyStopping::new(3, false);
    let obs: Vec<_> = [5.0, 4.0, 4.5, 4.6, 4.7].iter().enumerate().map(|(i, &m)| s.observe(i as u64 + 1, m)).collect();
    assert_eq!(obs.iter().map(|o| o.stop).collect::<Vec<_>>(), vec![false, false, false, false, true]);
    assert_eq!(s.best_step, Some(2));
    assert_eq!(s.best, Some(4.0));

    let mut up = EarlyStopping::new(1, true);
    assert!(up.observe(1, 0.2).is_best);
    assert!(up.observe(2, 0.3).is_best);
    assert!(up.observe(3, 0.3).stop);
}

fn checkpoint(with_optimizer: bool) -> Checkpoint<f64> {
    let config = EncoderConfig { num_layers: 1, hidden_size: 4, num_heads: 2, ffn_size: 6, vocab_size: 9, max_positions: 8, ..Default::default() };
    let params = ModelParams::init(&config);
    let optimizer = with_optimizer.then(|| {
        let mut o = OptimizerState::new(&config);
        o.m = ModelParams::init(&EncoderConfig { seed: 1, ..config.clone() });
        o.t = 17;
        o
    });
    Checkpoint { config, params, optimizer, vocab_hash: "abc".into(), step: 42 }
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    for with_opt in [false, true] {
        let c = checkpoint(with_opt);
        let bytes = c.to_bytes();
        let back = Checkpoint::<f64>::from_bytes(&bytes, Some("abc")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&path, &checkpoint(true)).unwrap();
    assert_eq!(load_checkpoint::<f64>(&path, None).unwrap(), checkpoint(true));
}

#[test]
fn checkpoint_errors() {
    let bytes = checkpoint(true).to_bytes();
    for cut in [0, 10, 30, bytes.len() / 2, bytes.len() - 1] {
        assert!(matches!(Checkpoint::<f64>::from_bytes(&bytes[..cut], None), Err(CheckpointError::CorruptFile(_))), "cut {cut}");
    }
    let mut flipped = bytes.clone();
    flipped[bytes.len() / 2] ^= 1;
    assert!(matches!(Checkpoint::<f64>::from_bytes(&flipped, None), Err(CheckpointError::CorruptFile(_))));
    assert!(matches!(
        Checkpoint::<f64>::from_bytes(&bytes, Some("other")),
        Err(CheckpointError::VocabHashMismatch { .. })
    ));
    let mut versioned = bytes.clone();
    versioned[8] = 9;
    assert!(matches!(
        Checkpoint::<f64>::from_bytes(&versioned, None),
        Err(CheckpointError::FormatVersionMismatch { found: 9, expected: 1 })
    ));
}

#[test]
fn single_precision_checkpoint_round_trip() {
    let c = checkpoint(false);
    let single = Checkpoint::<f32>::from_bytes(&c.to_bytes(), None).unwrap();
    assert_eq!(Checkpoint::<f32>::from_bytes(&single.to_bytes(), None).unwrap(), single);
}

struct Fixture {
    contexts: Vec<Context>,
    val: ValidationSet,
    vocab: Vocabulary,
}

fn fixture() -> Fixture {
    let docs = generate_corpus(&SyntheticConfig { num_docs: 6, ..SyntheticConfig::overfit(1) });
    let texts: Vec<&str> = docs.iter().flat_map(|d| [d.body.as_str(), d.query.as_deref().unwrap()]).collect();
    let vocab = Vocabulary::from_corpus(texts, &SpecialTokens::default());
    let spans = annotate_corpus(&docs, &PorterNormalizer, Default::default()).unwrap();
    let chunking = ChunkingConfig { window_sentences: 2, ..Default::default() };
    let contexts = training_contexts(&docs, &spans, &chunking, &vocab).flatten();
    let val = validation_set(&docs, &spans, &chunking, &vocab);
    Fixture { contexts, val, vocab }
}

fn small_model(vocab: &Vocabulary) -> SpanModel<f64> {
    SpanModel::new(EncoderConfig {
        num_layers: 1,
        hidden_size: 16,
        num_heads: 2,
        ffn_size: 32,
        vocab_size: vocab.len(),
        max_positions: 128,
        seed: 5,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn training_is_reproducible_and_returns_best() {
    let f = fixture();
    let cfg = TrainingConfig { batch_size: 4, eval_interval_steps: 5, max_steps: 20, patience: 10, ..Default::default() };
    let run = || train(TrainStart::fresh(small_model(&f.vocab)), &f.contexts, &f.val, &cfg, &PorterNormalizer, &f.vocab.hash()).unwrap();
    let a = run();
    let b = run();
    assert_eq!(a.log, b.log);
    assert_eq!(a.best.params, b.best.params);
    assert_eq!(a.log.rows.len(), 4);
    assert_eq!(a.last_step, 20);
    let best_row = a.log.rows.iter().rfind(|r| r.is_best).unwrap();
    assert_eq!(a.best.step, best_row.step);
    let min = a.log.rows.iter().map(|r| r.val_metric).fold(f64::INFINITY, f64::min);
    assert_eq!(best_row.val_metric, min);
    assert!(a.log.to_csv().starts_with("step,train_loss,val_metric,is_best\n5,"));
}

#[test]
fn resume_continues_step_counter() {
    let f = fixture();
    let cfg = TrainingConfig { batch_size: 4, eval_interval_steps: 5, max_steps: 10, patience: 10, ..Default::default() };
    let first = train(TrainStart::fresh(small_model(&f.vocab)), &f.contexts, &f.val, &cfg, &PorterNormalizer, "h").unwrap();
    let more = TrainingConfig { max_steps: 20, ..cfg };
    let start = TrainStart::resume(first.best.clone()).unwrap();
    let resumed = train(start, &f.contexts, &f.val, &more, &PorterNormalizer, "h").unwrap();
    assert_eq!(resumed.log.rows.first().unwrap().step, first.best.step + 5);
    assert_eq!(resumed.last_step, 20);
    assert!(resumed.best.optimizer.as_ref().unwrap().t > first.best.optimizer.as_ref().unwrap().t);
}

#[test]
fn f1_selection_and_errors() {
    let f = fixture();
    let cfg = TrainingConfig { batch_size: 4, eval_interval_steps: 3, max_steps: 6, selection_metric: SelectionMetric::F1AtK, ..Default::default() };
    let out = train(TrainStart::fresh(small_model(&f.vocab)), &f.contexts, &f.val, &cfg, &PorterNormalizer, "h").unwrap();
    assert!(out.log.rows.iter().all(|r| (0.0..=1.0).contains(&r.val_metric)));
    let empty = train(TrainStart::fresh(small_model(&f.vocab)), &[], &f.val, &cfg, &PorterNormalizer, "h");
    assert!(matches!(empty, Err(TrainingError::EmptyDataset)));
    let no_val = train(TrainStart::fresh(small_model(&f.vocab)), &f.contexts, &ValidationSet::default(), &cfg, &PorterNormalizer, "h");
    assert!(matches!(no_val, Err(TrainingError::EmptyValidation)));
    assert!(TrainingConfig { patience: 0, ..Default::default() }.validate().is_err());
    assert_eq!("f1_at_k".parse::<SelectionMetric>().unwrap(), SelectionMetric::F1AtK);
}

#[test]
fn early_stop_bounds_evaluations_after_best() {
    let f = fixture();
    let cfg = TrainingConfig {
        batch_size: 4,
        eval_interval_steps: 1,
        max_steps: 200,
        patience: 2,
        optimizer: AdamWConfig { learning_rate: 0.5, ..Default::default() },
        ..Default::default()
    };
    let out = train(TrainStart::fresh(small_model(&f.vocab)), &f.contexts, &f.val, &cfg, &PorterNormalizer, "h").unwrap();
    let best_idx = out.log.rows.iter().rposition(|r| r.is_best).unwrap();
    assert!(out.log.rows.len() - 1 - best_idx <= 2);
    if out.stopped_early {
        assert_eq!(out.log.rows.len() - 1 - best_idx, 2);
    }
}
