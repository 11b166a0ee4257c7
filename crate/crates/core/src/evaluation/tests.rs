use std::collections::HashMap;

use super::*;
use crate::text::{IdentityNormalizer, PorterNormalizer};

fn golds(entries: &[(&str, &[&str])]) -> HashMap<String, Vec<String>> {
    entries.iter().map(|(id, g)| (id.to_string(), g.iter().map(|s| s.to_string()).collect())).collect()
}

fn preds(entries: &[(&str, &[&str])]) -> Vec<(String, Vec<String>)> {
    entries.iter().map(|(id, p)| (id.to_string(), p.iter().map(|s| s.to_string()).collect())).collect()
}

#[test]
fn single_document_fixture() {
    let g = golds(&[("d", &["a", "b", "c", "d"])]);
    let p = preds(&[("d", &["a", "b", "x", "y", "z", "c"])]);
    let r = f1_at_k(&p, &g, 5, &PorterNormalizer).unwrap();
    assert_eq!((r.matched, r.predicted, r.gold), (2, 5, 4));
    assert!((r.precision - 0.4).abs() < 1e-12);
    assert!((r.recall - 0.5).abs() < 1e-12);
    assert!((r.f1 - 4.0 / 9.0).abs() < 1e-12);
}

#[test]
fn perfect_and_disjoint() {
    let g = golds(&[("d", &["neural network", "graph"])]);
    let r = f1_at_k(&preds(&[("d", &["graph", "neural network"])]), &g, 5, &PorterNormalizer).unwrap();
    assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    let r = f1_at_k(&preds(&[("d", &["tree"])]), &g, 5, &PorterNormalizer).unwrap();
    assert_eq!(r.f1, 0.0);
    let r = f1_at_k(&preds(&[("d", &[])]), &g, 5, &PorterNormalizer).unwrap();
    assert_eq!((r.precision, r.f1), (0.0, 0.0));
}

#[test]
fn micro_totals_over_three_documents() {
    let g = golds(&[("a", &["x", "y"]), ("b", &["p", "q", "r"]), ("c", &["m"])]);
    let p = preds(&[("a", &["x", "z"]), ("b", &["p", "q", "s", "r"]), ("c", &["n", "o"])]);
    let r = f1_at_k(&p, &g, 3, &PorterNormalizer).unwrap();
    assert_eq!((r.matched, r.predicted, r.gold), (3, 7, 6));
    let doc_b = &r.documents[1];
    assert_eq!((doc_b.matched, doc_b.predicted, doc_b.gold), (2, 3, 3));
    let (pr, rc) = (3.0 / 7.0, 0.5);
    assert!((r.f1 - 2.0 * pr * rc / (pr + rc)).abs() < 1e-12);
}

#[test]
fn stem_and_case_invariant() {
    let g = golds(&[("d", &["Neural Networks", "graph model"])]);
    let a = f1_at_k(&preds(&[("d", &["neural network", "GRAPH MODELS"])]), &g, 5, &PorterNormalizer).unwrap();
    assert_eq!(a.f1, 1.0);
    let b = f1_at_k(&preds(&[("d", &["neural network"])]), &g, 5, &IdentityNormalizer).unwrap();
    assert_eq!(b.matched, 0);
}

#[test]
fn duplicates_count_once() {
    let g = golds(&[("d", &["net", "nets", "tree"])]);
    let r = f1_at_k(&preds(&[("d", &["net", "Nets", "tree"])]), &g, 5, &PorterNormalizer).unwrap();
    assert_eq!((r.matched, r.predicted, r.gold), (2, 2, 2));
}

#[test]
fn recall_monotone_in_k() {
    let g = golds(&[("d", &["a", "c", "e"])]);
    let p = preds(&[("d", &["a", "b", "c", "d", "e"])]);
    let mut last = 0;
    for k in 1..=6 {
        let r = f1_at_k(&p, &g, k, &PorterNormalizer).unwrap();
        assert!(r.matched >= last);
        last = r.matched;
    }
    assert_eq!(last, 3);
}

#[test]
fn missing_gold_and_bad_k() {
    let g = golds(&[("a", &["x"])]);
    assert!(matches!(f1_at_k(&preds(&[("b", &["x"])]), &g, 5, &PorterNormalizer), Err(EvalError::MissingGold(id)) if id == "b"));
    assert!(matches!(f1_at_k(&preds(&[("a", &["x"])]), &g, 0, &PorterNormalizer), Err(EvalError::InvalidK)));
}

#[test]
fn report_serialization() {
    let g = golds(&[("d", &["a", "b", "c", "d"])]);
    let r = f1_at_k(&preds(&[("d", &["a", "b", "x", "y", "z"])]), &g, 5, &PorterNormalizer).unwrap();
    assert_eq!(r.to_csv(), format!("{}\n5,2,5,4,0.4,0.5,{}\n", EvalReport::CSV_HEADER, r.f1));
    assert_eq!(r.documents_csv(), "id,matched,predicted,gold\nd,2,5,4\n");
    assert!(r.to_string().contains("F1@5: 0.4444"));
}

fn run(window: usize, with_query: bool, seed: u64, f1: f64) -> SweepRun {
    let mut report = EvalReport::from_documents(5, vec![]);
    report.f1 = f1;
    SweepRun { window_sentences: window, with_query, seed, report }
}

#[test]
fn sweep_tables() {
    let (rows, summary) = sweep_report(&[]);
    assert_eq!(rows, "window_sentences,with_query,precision,recall,f1\n");
    assert_eq!(summary, "window_sentences,with_query,runs,mean_f1,ci95_f1\n");

    let (rows, summary) = sweep_report(&[run(1, true, 0, 0.25)]);
    assert_eq!(rows.lines().count(), 2);
    assert_eq!(summary.lines().nth(1).unwrap(), "1,true,1,0.25,");

    let f1s = [0.31, 0.35, 0.28, 0.4, 0.33];
    let runs: Vec<_> = f1s.iter().enumerate().map(|(s, &f)| run(2, false, s as u64, f)).collect();
    let s = &summarize_sweep(&runs)[0];
    // Reference values from scipy.stats.t.ppf(0.975, 4) * sd / sqrt(5).
    assert!((s.mean_f1 - 0.334).abs() < 1e-12);
    assert!((s.ci95_f1.unwrap() - 0.05594381872382138).abs() < 1e-9);
}
