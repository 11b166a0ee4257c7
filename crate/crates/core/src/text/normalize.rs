use std::io::Write;
use std::process::{Command, Stdio};

use super::porter::porter_stem;
use super::words::content_words;
use super::TextError;

/// Maps lowercase words to their canonical matching forms.
///
/// Implementations receive a batch so that external processes can be
/// invoked once per batch rather than once per word.
pub trait Normalizer: Send + Sync {
    fn normalize_words(&self, words: &[String]) -> Result<Vec<String>, TextError>;
}

/// Porter stemming, iterated until the stem no longer changes.
///
/// A single Porter pass is not idempotent (`agreed -> agre -> agr`); iterating
/// makes the key a fixed point so normalizing a normalized key is a no-op.
#[derive(Debug, Clone, Copy, Default)]
pub struct PorterNormalizer;

impl PorterNormalizer {
    pub fn canonical(word: &str) -> String {
        let mut cur = porter_stem(word);
        for _ in 0..16 {
            let next = porter_stem(&cur);
            if next == cur {
                break;
            }
            cur = next;
        }
        cur
    }
}

impl Normalizer for PorterNormalizer {
    fn normalize_words(&self, words: &[String]) -> Result<Vec<String>, TextError> {
        Ok(words.iter().map(|w| Self::canonical(w)).collect())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityNormalizer;

impl Normalizer for IdentityNormalizer {
    fn normalize_words(&self, words: &[String]) -> Result<Vec<String>, TextError> {
        Ok(words.to_vec())
    }
}

/// Line-oriented external normalizer (e.g. a lemmatizer): one word per line
/// on stdin, one normalized form per line on stdout.
#[derive(Debug, Clone)]
pub struct CommandNormalizer {
    pub program: String,
    pub args: Vec<String>,
}

impl CommandNormalizer {
    /// Parses a whitespace separated command line.
    pub fn parse(command: &str) -> Option<Self> {
        let mut parts = command.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(Self { program, args: parts.collect() })
    }
}

impl Normalizer for CommandNormalizer {
    fn normalize_words(&self, words: &[String]) -> Result<Vec<String>, TextError> {
        if words.is_empty() {
            return Ok(Vec::new());
        }
        let fail = |reason: String| TextError::ExternalNormalizerFailure {
            command: self.program.clone(),
            reason,
        };
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| fail(e.to_string()))?;
        let mut input = words.join("\n");
        input.push('\n');
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let output = child.wait_with_output().map_err(|e| fail(e.to_string()))?;
        writer
            .join()
            .map_err(|_| fail("stdin writer panicked".into()))?
            .map_err(|e| fail(e.to_string()))?;
        if !output.status.success() {
            return Err(fail(format!(
                "exit status {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let text = String::from_utf8(output.stdout).map_err(|e| fail(e.to_string()))?;
        let lines: Vec<String> = text.lines().map(str::to_string).collect();
        if lines.len() != words.len() {
            return Err(fail(format!("expected {} lines, got {}", words.len(), lines.len())));
        }
        Ok(lines)
    }
}

/// Lowercased content words of a phrase; punctuation (hyphens included)
/// separates words and is otherwise dropped.
pub fn phrase_words(phrase: &str) -> Vec<String> {
    let chars: Vec<char> = phrase.chars().collect();
    content_words(phrase)
        .into_iter()
        .map(|w| chars[w.start..w.end].iter().collect::<String>().to_lowercase())
        .collect()
}

fn join_forms(forms: impl IntoIterator<Item = String>) -> String {
    let mut out = String::new();
    for f in forms {
        for part in f.split_whitespace() {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(part);
        }
    }
    out
}

/// Canonical matching key of a keyphrase: lowercased content words, each
/// normalized, joined by single spaces.
pub fn normalize_keyphrase(phrase: &str, normalizer: &dyn Normalizer) -> Result<String, TextError> {
    let words = phrase_words(phrase);
    if words.is_empty() {
        return Ok(String::new());
    }
    Ok(join_forms(normalizer.normalize_words(&words)?))
}

/// Batched [`normalize_keyphrase`]: one normalizer call for all phrases.
pub fn normalize_keyphrases<S: AsRef<str>>(phrases: &[S], normalizer: &dyn Normalizer) -> Result<Vec<String>, TextError> {
    let per_phrase: Vec<Vec<String>> = phrases.iter().map(|p| phrase_words(p.as_ref())).collect();
    let flat: Vec<String> = per_phrase.iter().flatten().cloned().collect();
    let forms = normalizer.normalize_words(&flat)?;
    let mut it = forms.into_iter();
    Ok(per_phrase
        .iter()
        .map(|ws| join_forms(it.by_ref().take(ws.len())))
        .collect())
}
