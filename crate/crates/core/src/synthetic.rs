//! Seeded synthetic corpora with planted keyphrases.
//!
//! Every document belongs to one topic. Its title names the topic, its gold
//! keyphrases are drawn from that topic's phrase pool, and its body plants
//! each gold phrase in a filler sentence next to distractor phrases drawn
//! from other topics in the same sentence templates.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::text::{normalize_keyphrase, PorterNormalizer};

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ru", "te", "zan", "bo", "vel", "qui", "dar", "nex", "sol", "tor", "fyn", "gal", "pem", "rix",
    "hul", "cor", "wen", "jas", "ploo", "dri", "mau",
];

const FILLER: [&str; 32] = [
    "the", "study", "shows", "that", "results", "of", "method", "we", "use", "data", "in", "this", "work", "paper",
    "model", "approach", "is", "used", "for", "analysis", "with", "and", "new", "our", "experiments", "report",
    "observed", "section", "describe", "further", "evidence", "overall",
];

const OPENERS: [&str; 8] = ["Here", "Then", "Moreover", "Also", "Thus", "Finally", "Next", "Again"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub num_docs: usize,
    pub num_topics: usize,
    pub phrases_per_topic: usize,
    pub gold_per_doc: usize,
    pub distractors_per_doc: usize,
    /// Sentences without any phrase.
    pub filler_sentences: usize,
    pub seed: u64,
}

impl SyntheticConfig {
    /// 20 documents with five planted keyphrases each and no distractors.
    pub fn overfit(seed: u64) -> Self {
        Self {
            num_docs: 20,
            num_topics: 4,
            phrases_per_topic: 12,
            gold_per_doc: 5,
            distractors_per_doc: 0,
            filler_sentences: 2,
            seed,
        }
    }

    /// Gold phrases identifiable only through the title.
    pub fn topic_conditioned(num_docs: usize, seed: u64) -> Self {
        Self {
            num_docs,
            num_topics: 4,
            phrases_per_topic: 6,
            gold_per_doc: 3,
            distractors_per_doc: 6,
            filler_sentences: 1,
            seed,
        }
    }
}

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=3);
    (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

/// Topic names and phrase pools whose normalized forms are pairwise
/// distinct and never contain filler words.
fn topics(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<Vec<String>>) {
    let mut used: HashSet<String> = FILLER.iter().map(|w| w.to_string()).collect();
    used.extend(OPENERS.iter().map(|w| w.to_lowercase()));
    let mut fresh_word = |rng: &mut ChaCha8Rng| loop {
        let w = pseudo_word(rng);
        let key = normalize_keyphrase(&w, &PorterNormalizer).unwrap();
        if used.insert(key) && used.insert(w.clone()) {
            return w;
        }
    };
    let names: Vec<String> = (0..cfg.num_topics).map(|_| fresh_word(rng)).collect();
    let pools = (0..cfg.num_topics)
        .map(|_| {
            (0..cfg.phrases_per_topic)
                .map(|_| {
                    let len = [1, 2, 2, 2, 3][rng.random_range(0..5)];
                    (0..len).map(|_| fresh_word(rng)).collect::<Vec<_>>().join(" ")
                })
                .collect()
        })
        .collect();
    (names, pools)
}

fn filler(rng: &mut ChaCha8Rng, n: usize) -> Vec<&'static str> {
    (0..n).map(|_| *FILLER.choose(rng).unwrap()).collect()
}

fn sentence(rng: &mut ChaCha8Rng, phrase: Option<&str>) -> String {
    let mut words = vec![*OPENERS.choose(rng).unwrap()];
    let n = rng.random_range(2..5);
    words.extend(filler(rng, n));
    if let Some(p) = phrase {
        words.push(p);
    }
    let n = rng.random_range(1..4);
    words.extend(filler(rng, n));
    format!("{}.", words.join(" "))
}

/// Generates `cfg.num_docs` documents with ids `doc-0000`, `doc-0001`, ...
pub fn generate_corpus(cfg: &SyntheticConfig) -> Vec<Document> {
    assert!(cfg.num_topics >= 1 && cfg.gold_per_doc <= cfg.phrases_per_topic);
    assert!(cfg.distractors_per_doc == 0 || cfg.num_topics >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (names, pools) = topics(cfg, &mut rng);
    (0..cfg.num_docs)
        .map(|i| {
            let topic = rng.random_range(0..cfg.num_topics);
            let gold: Vec<&String> = pools[topic].choose_multiple(&mut rng, cfg.gold_per_doc).collect();
            let mut planted: Vec<Option<&str>> = gold.iter().map(|g| Some(g.as_str())).collect();
            for _ in 0..cfg.distractors_per_doc {
                let other = loop {
                    let t = rng.random_range(0..cfg.num_topics);
                    if t != topic {
                        break t;
                    }
                };
                planted.push(Some(pools[other].choose(&mut rng).unwrap().as_str()));
            }
            planted.extend((0..cfg.filler_sentences).map(|_| None));
            planted.shuffle(&mut rng);
            let body: Vec<String> = planted.into_iter().map(|p| sentence(&mut rng, p)).collect();
            let title = format!("Notes on {}", names[topic]);
            let keyphrases: Vec<&str> = gold.iter().map(|g| g.as_str()).collect();
            Document::new(format!("doc-{i:04}"), Some(&title), body.join(" "), &keyphrases)
        })
        .collect()
}
