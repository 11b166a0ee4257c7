use std::fmt;

use super::{split_sentences, Document, GoldSpan};

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub documents: usize,
    pub sentences: usize,
    pub sentences_without_keyphrase: usize,
    pub gold_keyphrases: usize,
    pub extractive_keyphrases: usize,
}

impl StatsReport {
    /// Fraction of sentences that no gold span touches.
    pub fn sentences_without_keyphrase_ratio(&self) -> f64 {
        ratio(self.sentences_without_keyphrase, self.sentences)
    }

    /// Fraction of gold keyphrases with at least one span in their document.
    pub fn extractive_ratio(&self) -> f64 {
        ratio(self.extractive_keyphrases, self.gold_keyphrases)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "documents: {}", self.documents)?;
        writeln!(f, "sentences: {}", self.sentences)?;
        writeln!(
            f,
            "sentences without keyphrase: {} ({:.4})",
            self.sentences_without_keyphrase,
            self.sentences_without_keyphrase_ratio()
        )?;
        writeln!(f, "gold keyphrases: {}", self.gold_keyphrases)?;
        write!(
            f,
            "extractive keyphrases: {} ({:.4})",
            self.extractive_keyphrases,
            self.extractive_ratio()
        )
    }
}

/// `spans[i]` must hold the gold spans of `docs[i]`.
pub fn dataset_stats(docs: &[Document], spans: &[Vec<GoldSpan>]) -> StatsReport {
    assert_eq!(docs.len(), spans.len(), "one span list per document");
    let mut report = StatsReport {
        documents: docs.len(),
        sentences: 0,
        sentences_without_keyphrase: 0,
        gold_keyphrases: 0,
        extractive_keyphrases: 0,
    };
    for (doc, doc_spans) in docs.iter().zip(spans) {
        let sentences = split_sentences(&doc.body);
        report.sentences += sentences.len();
        report.sentences_without_keyphrase += sentences
            .iter()
            .filter(|s| {
                !doc_spans
                    .iter()
                    .any(|g| g.char_start < s.char_end && g.char_end > s.char_start)
            })
            .count();
        report.gold_keyphrases += doc.gold_keyphrases.len();
        let mut found = vec![false; doc.gold_keyphrases.len()];
        for g in doc_spans {
            found[g.keyphrase_index] = true;
        }
        report.extractive_keyphrases += found.iter().filter(|&&f| f).count();
    }
    report
}
