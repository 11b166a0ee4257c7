use super::vocab::Vocabulary;
use super::words::split_words;

/// Token ids with char offsets into the source string.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub offsets: Vec<(usize, usize)>,
    /// True iff the token begins a source word.
    pub word_start: Vec<bool>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// True iff token `i` is the last token of its word.
    pub fn word_end(&self, i: usize) -> bool {
        i + 1 == self.ids.len() || self.word_start[i + 1]
    }
}

/// Greedy longest-match subword tokenization.
///
/// Words come from [`split_words`]; each is decomposed left to right into the
/// longest vocabulary pieces, non-initial pieces carrying the continuation
/// marker. A word without a full decomposition becomes one UNK token.
pub fn tokenize(text: &str, vocab: &Vocabulary) -> TokenSequence {
    let chars: Vec<char> = text.chars().collect();
    let mut out = TokenSequence::default();
    let unk = vocab.special().unk;
    let mut buf = String::new();
    for w in split_words(text) {
        let word = &chars[w.start..w.end];
        let pieces = if word.len() > vocab.max_word_chars() {
            None
        } else {
            greedy_pieces(word, vocab, &mut buf)
        };
        match pieces {
            Some(pieces) => {
                for (k, (id, s, e)) in pieces.into_iter().enumerate() {
                    out.ids.push(id);
                    out.offsets.push((w.start + s, w.start + e));
                    out.word_start.push(k == 0);
                }
            }
            None => {
                out.ids.push(unk);
                out.offsets.push((w.start, w.end));
                out.word_start.push(true);
            }
        }
    }
    out
}

fn greedy_pieces(word: &[char], vocab: &Vocabulary, buf: &mut String) -> Option<Vec<(u32, usize, usize)>> {
    let mut pieces = Vec::new();
    let mut start = 0;
    while start < word.len() {
        let mut found = None;
        let mut end = word.len();
        while end > start {
            buf.clear();
            if start > 0 {
                buf.push_str(vocab.continuation());
            }
            buf.extend(&word[start..end]);
            if let Some(id) = vocab.id(buf) {
                found = Some(id);
                break;
            }
            end -= 1;
        }
        let id = found?;
        pieces.push((id, start, end));
        start = end;
    }
    Some(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::vocab::SpecialTokens;

    fn vocab(extra: &[&str]) -> Vocabulary {
        let mut e: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"].iter().map(|s| s.to_string()).collect();
        e.extend(extra.iter().map(|s| s.to_string()));
        Vocabulary::new(e, &SpecialTokens::default()).unwrap()
    }

    #[test]
    fn unaffable_hand_trace() {
        let v = vocab(&["un", "##aff", "##able", "##a", "aff", "able"]);
        let t = tokenize("unaffable", &v);
        let pieces: Vec<_> = t.ids.iter().map(|&i| v.token(i).unwrap()).collect();
        assert_eq!(pieces, ["un", "##aff", "##able"]);
        assert_eq!(t.offsets, vec![(0, 2), (2, 5), (5, 9)]);
        assert_eq!(t.word_start, vec![true, false, false]);
        assert!(t.word_end(2) && !t.word_end(0));
    }

    #[test]
    fn empty_input() {
        let v = vocab(&[]);
        assert!(tokenize("", &v).is_empty());
    }

    #[test]
    fn unknown_word_is_single_unk() {
        let v = vocab(&["q"]);
        let t = tokenize("qqqq", &v);
        assert_eq!(t.ids, vec![v.special().unk]);
        assert_eq!(t.offsets, vec![(0, 4)]);
    }

    #[test]
    fn punctuation_and_case() {
        let v = vocab(&["Deep", "deep", "nets", "."]);
        let t = tokenize("Deep nets.", &v);
        assert_eq!(t.offsets, vec![(0, 4), (5, 9), (9, 10)]);
        assert_eq!(t.word_start, vec![true, true, true]);
        assert_eq!(t.ids[0], v.id("Deep").unwrap());
    }
}
