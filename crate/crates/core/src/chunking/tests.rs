use super::*;
use crate::corpus::{annotate_gold_spans, split_sentences, AnnotateConfig, Document};
use crate::text::{tokenize, PorterNormalizer, SpecialTokens, Vocabulary};

fn vocab_for(texts: &[&str]) -> Vocabulary {
    Vocabulary::from_corpus(texts.iter().copied(), &SpecialTokens::default())
}

fn build(doc: &Document, cfg: &ChunkingConfig, vocab: &Vocabulary) -> ChunkedDocument {
    let sentences = split_sentences(&doc.body);
    let spans = annotate_gold_spans(doc, &PorterNormalizer, AnnotateConfig::default()).unwrap();
    build_contexts(doc, &sentences, &spans, cfg, vocab)
}

const FIVE: &str = "Alpha one. Beta two. Gamma three. Delta four. Epsilon five.";

#[test]
fn windows_group_consecutive_sentences() {
    assert_eq!(sentence_windows(5, 2), vec![(0, 1), (2, 3), (4, 4)]);
    let doc = Document::new("d", None, FIVE, &[]);
    let vocab = vocab_for(&[FIVE]);
    let cfg = ChunkingConfig { window_sentences: 2, with_query: false, ..Default::default() };
    let ranges: Vec<_> = build(&doc, &cfg, &vocab).contexts.iter().map(|c| c.sentence_range).collect();
    assert_eq!(ranges, vec![(0, 1), (2, 3), (4, 4)]);
}

#[test]
fn query_layout() {
    let doc = Document::new("d", Some("Q"), FIVE, &[]);
    let vocab = vocab_for(&[FIVE, "Q"]);
    let cfg = ChunkingConfig { window_sentences: 1, with_query: true, ..Default::default() };
    let ctx = &build(&doc, &cfg, &vocab).contexts[0];
    let sp = vocab.special();
    assert_eq!(&ctx.input_ids[..3], &[sp.cls, vocab.id("Q").unwrap(), sp.sep]);
    assert_eq!(ctx.layout.query, Some(1..2));
    assert_eq!(*ctx.input_ids.last().unwrap(), sp.sep);
    assert_eq!(ctx.segment_ids, vec![0, 0, 0, 1, 1, 1, 1]);
    assert_eq!(ctx.text, "Alpha one.");

    let no_q = ChunkingConfig { with_query: false, ..cfg };
    let ctx = &build(&doc, &no_q, &vocab).contexts[0];
    assert_eq!(ctx.input_ids[0], sp.cls);
    assert_eq!(ctx.layout.query, None);
    assert_eq!(ctx.layout.text, 1..4);
}

#[test]
fn missing_query_warns_and_builds_without() {
    let doc = Document::new("d", None, FIVE, &[]);
    let vocab = vocab_for(&[FIVE]);
    let cfg = ChunkingConfig { with_query: true, ..Default::default() };
    let out = build(&doc, &cfg, &vocab);
    assert!(out.query_missing);
    assert!(out.contexts.iter().all(|c| c.layout.query.is_none()));
}

#[test]
fn empty_document_has_no_contexts() {
    let doc = Document::new("d", Some("Q"), "   ", &[]);
    let vocab = vocab_for(&["Q"]);
    assert!(build(&doc, &ChunkingConfig::default(), &vocab).contexts.is_empty());
}

#[test]
fn overlong_window_is_split_under_limit() {
    let body = "a b c d e f g h i j k l. m n o p q r s t u v w x. y z a b c d e f g h i j.";
    let doc = Document::new("d", Some("title words"), body, &["c d e"]);
    let vocab = vocab_for(&[body, "title words"]);
    let cfg = ChunkingConfig { window_sentences: 3, with_query: true, max_input_size: 16, mode: Mode::Train };
    let out = build(&doc, &cfg, &vocab);
    assert!(out.contexts.len() >= 2);
    for c in &out.contexts {
        assert!(c.len() <= 16);
        assert_eq!(c.layout.query, Some(1..3));
        for &(s, e) in &c.gold_spans {
            assert_eq!(c.surface(c.text_position(s), c.text_position(e)), "c d e");
        }
    }
    let spans: usize = out.contexts.iter().map(|c| c.gold_spans.len()).sum();
    assert_eq!(spans, 2);
}

#[test]
fn text_segments_partition_the_body() {
    let body = "Deep networks excel at many tasks. A deep network model is trained. \
                It uses many deep networks in parallel! Does it work? Yes it does.";
    let doc = Document::new("d", Some("Deep networks"), body, &["deep networks", "network model"]);
    let vocab = vocab_for(&[body, "Deep networks"]);
    let whole = tokenize(body, &vocab);
    for window in 1..=4 {
        for max in [6, 9, 14, 64] {
            for mode in [Mode::Train, Mode::Infer] {
                let cfg = ChunkingConfig { window_sentences: window, with_query: true, max_input_size: max, mode };
                let out = build(&doc, &cfg, &vocab);
                if out.truncated_contexts > 0 {
                    continue;
                }
                let ids: Vec<u32> = out
                    .contexts
                    .iter()
                    .flat_map(|c| c.input_ids[c.layout.text.clone()].to_vec())
                    .collect();
                assert_eq!(ids, whole.ids, "window {window} max {max}");
                let offsets: Vec<_> = out.contexts.iter().flat_map(|c| c.text_offsets.clone()).collect();
                assert_eq!(offsets, whole.offsets);
            }
        }
    }
}

#[test]
fn targets_only_on_text_span_boundaries() {
    let body = "Deep networks excel. A deep network model. Nothing here.";
    let doc = Document::new("d", Some("Deep networks"), body, &["deep networks", "model"]);
    let vocab = vocab_for(&[body, "Deep networks"]);
    let cfg = ChunkingConfig { window_sentences: 2, with_query: true, max_input_size: 64, mode: Mode::Train };
    let out = build(&doc, &cfg, &vocab);
    let mut total = 0;
    for c in &out.contexts {
        let t = c.targets.as_ref().unwrap();
        let valid = c.valid_mask();
        for (i, &v) in valid.iter().enumerate() {
            if !v {
                assert_eq!((t.start[i], t.end[i]), (0, 0));
            }
        }
        let starts: usize = t.start.iter().map(|&x| x as usize).sum();
        let ends: usize = t.end.iter().map(|&x| x as usize).sum();
        assert_eq!(starts, c.gold_spans.len());
        assert_eq!(ends, c.gold_spans.len());
        total += c.gold_spans.len();
    }
    assert_eq!(total, 3);

    let infer = ChunkingConfig { mode: Mode::Infer, ..cfg };
    assert!(build(&doc, &infer, &vocab).contexts.iter().all(|c| c.targets.is_none()));
}

#[test]
fn span_across_windows_is_dropped() {
    let body = "We study deep. Networks here.";
    let doc = Document::new("d", None, body, &["deep networks"]);
    let vocab = vocab_for(&[body]);
    let cfg = ChunkingConfig { window_sentences: 1, with_query: false, max_input_size: 64, mode: Mode::Train };
    let out = build(&doc, &cfg, &vocab);
    assert_eq!(out.dropped_spans, 1);
    assert!(out.contexts.iter().all(|c| c.gold_spans.is_empty()));
}

#[test]
fn padding_is_invalid_and_target_free() {
    let doc = Document::new("d", Some("Q"), FIVE, &["alpha"]);
    let vocab = vocab_for(&[FIVE, "Q"]);
    let mut ctx = build(&doc, &ChunkingConfig::default(), &vocab).contexts.remove(0);
    let n = ctx.len();
    ctx.pad_to(n + 3, vocab.special().pad);
    assert_eq!(ctx.len(), n + 3);
    assert_eq!(ctx.layout.len, n);
    assert!(ctx.valid_mask()[n..].iter().all(|v| !v));
    assert_eq!(ctx.targets.as_ref().unwrap().start.len(), n + 3);
}

#[test]
fn saturation_counts_windows() {
    let short = Document::new("a", None, "One two. Three four.", &[]);
    let vocab = vocab_for(&["One two. Three four. Xx x x x x x x x."]);
    let cfg = ChunkingConfig { window_sentences: 1, with_query: false, max_input_size: 8, mode: Mode::Infer };
    assert_eq!(saturation_stats(std::slice::from_ref(&short), &cfg, &vocab), 0.0);
    let tight = ChunkingConfig { max_input_size: 4, ..cfg.clone() };
    assert_eq!(saturation_stats(std::slice::from_ref(&short), &tight, &vocab), 1.0);
    let mixed = Document::new("b", None, "One. Two. Three. Xx x x x x x x x.", &[]);
    assert_eq!(saturation_stats(&[mixed], &cfg, &vocab), 0.25);
    assert_eq!(saturation_stats(&[], &cfg, &vocab), 0.0);
}

#[test]
fn headline_fraction() {
    let body = "Introduction here. Text. Methods there. More text. Introduction again. \
                Aa. Bb. Cc. Dd. Ee.";
    let doc = Document::new("d", None, body, &[]);
    let vocab = vocab_for(&[body]);
    let cfg = ChunkingConfig { window_sentences: 1, with_query: false, max_input_size: 64, mode: Mode::Infer };
    let contexts = build(&doc, &cfg, &vocab).contexts;
    assert_eq!(contexts.len(), 10);
    let heads = vec!["Introduction".to_string(), "Methods".to_string()];
    assert!((headline_stats(&contexts, &heads) - 0.3).abs() < 1e-12);
    assert_eq!(headline_stats(&contexts, &[]), 0.0);
    assert_eq!(headline_stats(&contexts, &["introduction".to_string()]), 0.0);
    let all: Vec<_> = contexts.iter().take(1).cloned().collect();
    assert_eq!(headline_stats(&all, &["Introduction".to_string()]), 1.0);
}

#[test]
fn config_validation() {
    assert!(ChunkingConfig { window_sentences: 0, ..Default::default() }.validate().is_err());
    assert!(ChunkingConfig { max_input_size: 2, ..Default::default() }.validate().is_err());
    assert!(ChunkingConfig::default().validate().is_ok());
}
