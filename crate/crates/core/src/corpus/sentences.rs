/// A sentence as a char range `[char_start, char_end)` of the body.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sentence {
    pub char_start: usize,
    pub char_end: usize,
}

const ABBREVIATIONS: &[&str] = &[
    "al.", "approx.", "cf.", "co.", "corp.", "dept.", "dr.", "e.g.", "eq.", "eqs.", "etc.", "fig.", "figs.",
    "i.e.", "inc.", "jr.", "ltd.", "mr.", "mrs.", "ms.", "no.", "nos.", "pp.", "prof.", "ref.", "refs.", "sec.",
    "sr.", "st.", "tab.", "vol.", "vs.",
];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// True when the whitespace-delimited token ending at `end` (exclusive) is a
/// known abbreviation or a single-letter initial such as `J.`.
fn is_abbreviation(chars: &[char], end: usize) -> bool {
    let mut start = end;
    while start > 0 && !chars[start - 1].is_whitespace() {
        start -= 1;
    }
    let token: String = chars[start..end].iter().collect::<String>().to_lowercase();
    let token = token.trim_start_matches(|c: char| !c.is_alphanumeric());
    if ABBREVIATIONS.contains(&token) {
        return true;
    }
    let mut it = token.chars();
    matches!((it.next(), it.next(), it.next()), (Some(c), Some('.'), None) if c.is_alphabetic())
}

/// Rule-based sentence splitting.
///
/// A boundary follows a run of `.`, `!` or `?` when the run is followed by
/// whitespace and then an uppercase letter or digit, unless a period-final
/// run ends a known abbreviation. Ranges are trimmed of whitespace, so they
/// are disjoint, ordered, and cover every non-whitespace char.
pub fn split_sentences(body: &str) -> Vec<Sentence> {
    let chars: Vec<char> = body.chars().collect();
    let n = chars.len();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < n {
        if !is_terminator(chars[i]) {
            i += 1;
            continue;
        }
        let mut run_end = i + 1;
        while run_end < n && is_terminator(chars[run_end]) {
            run_end += 1;
        }
        let mut next = run_end;
        while next < n && chars[next].is_whitespace() {
            next += 1;
        }
        let boundary = next > run_end
            && next < n
            && (chars[next].is_uppercase() || chars[next].is_ascii_digit())
            && !(chars[run_end - 1] == '.' && run_end - i == 1 && is_abbreviation(&chars, run_end));
        if boundary {
            push_trimmed(&chars, start, run_end, &mut sentences);
            start = next;
        }
        i = run_end;
    }
    push_trimmed(&chars, start, n, &mut sentences);
    sentences
}

fn push_trimmed(chars: &[char], mut s: usize, mut e: usize, out: &mut Vec<Sentence>) {
    while s < e && chars[s].is_whitespace() {
        s += 1;
    }
    while e > s && chars[e - 1].is_whitespace() {
        e -= 1;
    }
    if s < e {
        out.push(Sentence { char_start: s, char_end: e });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::char_slice;

    fn texts(body: &str) -> Vec<&str> {
        split_sentences(body)
            .iter()
            .map(|s| char_slice(body, s.char_start, s.char_end))
            .collect()
    }

    #[test]
    fn basic_cases() {
        assert_eq!(texts("A cat. The dog ran."), ["A cat.", "The dog ran."]);
        assert_eq!(texts("no terminator here"), ["no terminator here"]);
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   ").is_empty());
    }

    #[test]
    fn abbreviations_and_lowercase_continuations() {
        assert_eq!(
            texts("See Fig. 3 and Dr. Smith. Values e.g. ten. J. Doe wrote it."),
            ["See Fig. 3 and Dr. Smith.", "Values e.g. ten.", "J. Doe wrote it."]
        );
        assert_eq!(texts("Version 2.0 is out. it continues"), ["Version 2.0 is out. it continues"]);
        assert_eq!(texts("Really?! Yes. 42 is it"), ["Really?!", "Yes.", "42 is it"]);
    }

    #[test]
    fn ranges_tile_non_whitespace() {
        let body = "  One.  Two!\nThree?   four ";
        let s = split_sentences(body);
        let chars: Vec<char> = body.chars().collect();
        let mut covered = vec![false; chars.len()];
        let mut last_end = 0;
        for sent in &s {
            assert!(sent.char_start >= last_end && sent.char_start < sent.char_end);
            last_end = sent.char_end;
            for c in &mut covered[sent.char_start..sent.char_end] {
                *c = true;
            }
        }
        for (c, cov) in chars.iter().zip(covered) {
            assert!(cov || c.is_whitespace());
        }
    }
}
