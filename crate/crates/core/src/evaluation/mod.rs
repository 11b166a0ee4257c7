//! F1@k scoring against gold keyphrases, micro-averaged over documents, and
//! context-size sweep tables.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::text::{normalize_keyphrases, Normalizer, TextError};

#[cfg(test)]
mod tests;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no gold keyphrases for document {0:?}")]
    MissingGold(String),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("k must be positive")]
    InvalidK,
}

/// Counts of one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentScore {
    pub id: String,
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub k: usize,
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub documents: Vec<DocumentScore>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl EvalReport {
    fn from_documents(k: usize, documents: Vec<DocumentScore>) -> Self {
        let matched = documents.iter().map(|d| d.matched).sum();
        let predicted = documents.iter().map(|d| d.predicted).sum();
        let gold = documents.iter().map(|d| d.gold).sum();
        let precision = ratio(matched, predicted);
        let recall = ratio(matched, gold);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { k, matched, predicted, gold, precision, recall, f1, documents }
    }

    pub const CSV_HEADER: &'static str = "k,matched,predicted,gold,precision,recall,f1";

    /// Header plus one corpus-level row.
    pub fn to_csv(&self) -> String {
        format!(
            "{}\n{},{},{},{},{},{},{}\n",
            Self::CSV_HEADER,
            self.k,
            self.matched,
            self.predicted,
            self.gold,
            self.precision,
            self.recall,
            self.f1
        )
    }

    /// Per-document counts as CSV.
    pub fn documents_csv(&self) -> String {
        let mut out = String::from("id,matched,predicted,gold\n");
        for d in &self.documents {
            writeln!(out, "{},{},{},{}", csv_field(&d.id), d.matched, d.predicted, d.gold).unwrap();
        }
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "documents: {}", self.documents.len())?;
        writeln!(f, "matched: {}  predicted: {}  gold: {}", self.matched, self.predicted, self.gold)?;
        writeln!(f, "P@{k}: {:.4}", self.precision, k = self.k)?;
        writeln!(f, "R@{k}: {:.4}", self.recall, k = self.k)?;
        write!(f, "F1@{k}: {:.4}", self.f1, k = self.k)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Normalized, deduplicated (first occurrence kept), non-empty forms.
fn unique_forms<S: AsRef<str>>(phrases: &[S], normalizer: &dyn Normalizer) -> Result<Vec<String>, TextError> {
    let mut seen = HashSet::new();
    Ok(normalize_keyphrases(phrases, normalizer)?
        .into_iter()
        .filter(|f| !f.is_empty() && seen.insert(f.clone()))
        .collect())
}

/// Micro-averaged precision, recall and F1 over each document's top `k`
/// predictions. `predictions` holds ranked phrase lists per document id;
/// only those documents are scored, and each must have gold keyphrases.
pub fn f1_at_k<S: AsRef<str>>(
    predictions: &[(String, Vec<S>)],
    golds: &HashMap<String, Vec<String>>,
    k: usize,
    normalizer: &dyn Normalizer,
) -> Result<EvalReport, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    let mut documents = Vec::with_capacity(predictions.len());
    for (id, ranked) in predictions {
        let gold = golds.get(id).ok_or_else(|| EvalError::MissingGold(id.clone()))?;
        let gold = unique_forms(gold, normalizer)?;
        let top = &ranked[..ranked.len().min(k)];
        let predicted = unique_forms(top, normalizer)?;
        let gold_set: HashSet<&String> = gold.iter().collect();
        let matched = predicted.iter().filter(|p| gold_set.contains(p)).count();
        documents.push(DocumentScore { id: id.clone(), matched, predicted: predicted.len(), gold: gold.len() });
    }
    Ok(EvalReport::from_documents(k, documents))
}

/// One evaluated cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub window_sentences: usize,
    pub with_query: bool,
    pub seed: u64,
    pub report: EvalReport,
}

/// Mean F1 of one (window, query) setting over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub window_sentences: usize,
    pub with_query: bool,
    pub runs: usize,
    pub mean_f1: f64,
    /// Half-width of the 0.95 Student-t interval; `None` with fewer than two runs.
    pub ci95_f1: Option<f64>,
}

/// Sample mean and 0.95 Student-t half-width.
pub fn mean_and_ci95(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (0.0, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
    (mean, Some(t.inverse_cdf(0.975) * (var / n as f64).sqrt()))
}

/// Groups runs by setting, in ascending window order with query-off first.
pub fn summarize_sweep(runs: &[SweepRun]) -> Vec<SweepSummary> {
    let mut groups: BTreeMap<(usize, bool), Vec<f64>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.window_sentences, r.with_query)).or_default().push(r.report.f1);
    }
    groups
        .into_iter()
        .map(|((window_sentences, with_query), f1s)| {
            let (mean_f1, ci95_f1) = mean_and_ci95(&f1s);
            SweepSummary { window_sentences, with_query, runs: f1s.len(), mean_f1, ci95_f1 }
        })
        .collect()
}

/// Per-run rows and per-setting summary as two CSV tables.
pub fn sweep_report(runs: &[SweepRun]) -> (String, String) {
    let mut rows = String::from("window_sentences,with_query,precision,recall,f1\n");
    for r in runs {
        writeln!(
            rows,
            "{},{},{},{},{}",
            r.window_sentences, r.with_query, r.report.precision, r.report.recall, r.report.f1
        )
        .unwrap();
    }
    let mut summary = String::from("window_sentences,with_query,runs,mean_f1,ci95_f1\n");
    for s in summarize_sweep(runs) {
        let ci = s.ci95_f1.map(|c| c.to_string()).unwrap_or_default();
        writeln!(summary, "{},{},{},{},{}", s.window_sentences, s.with_query, s.runs, s.mean_f1, ci).unwrap();
    }
    (rows, summary)
}
