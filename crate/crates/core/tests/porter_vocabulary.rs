use qbek::text::{porter_stem, PorterNormalizer};

fn vocabulary() -> Vec<(String, String)> {
    let words = include_str!("data/porter_voc.txt");
    let stems = include_str!("data/porter_output.txt");
    words
        .lines()
        .zip(stems.lines())
        .map(|(w, s)| (w.to_string(), s.to_string()))
        .collect()
}

#[test]
fn matches_published_sample_vocabulary() {
    let vocab = vocabulary();
    assert_eq!(vocab.len(), 23531);
    let mismatches: Vec<_> = vocab
        .iter()
        .filter(|(w, s)| &porter_stem(w) != s)
        .take(20)
        .collect();
    assert!(mismatches.is_empty(), "{mismatches:?}");
}

#[test]
fn canonical_form_is_idempotent_on_vocabulary() {
    for (w, _) in vocabulary() {
        let c = PorterNormalizer::canonical(&w);
        assert_eq!(PorterNormalizer::canonical(&c), c, "{w}");
    }
}
