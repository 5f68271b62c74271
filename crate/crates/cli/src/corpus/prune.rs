//! Per-document text pruning.
//!
//! Steps, in order: control characters (and their literal backslash-escaped
//! spellings) become spaces; whitespace tokenization; fully numeric tokens
//! dropped; lowercasing; punctuation characters removed; lemmatization;
//! tokens containing non-ASCII bytes dropped. Tokens emptied along the way
//! are dropped; relative order is preserved.
//!
//! Punctuation is stripped before lemmatization so that a trailing mark never
//! hides a plural from the analyzer ("miles!" reduces to "mile").

use super::lemma::lemmatize;

/// The 32 ASCII punctuation characters.
fn is_punct(c: char) -> bool {
    matches!(c,
        '!' | '"' | '#' | '$' | '%' | '&' | '\'' | '(' | ')' | '*' | '+' | ',' | '-' | '.'
        | '/' | ':' | ';' | '<' | '=' | '>' | '?' | '@' | '[' | '\\' | ']' | '^' | '_'
        | '`' | '{' | '|' | '}' | '~')
}

fn is_fully_numeric(token: &str) -> bool {
    !token.is_empty() && token.bytes().all(|b| b.is_ascii_digit())
}

/// Prunes raw text into clean lowercase lemmas. Empty input yields an empty
/// list.
pub fn prune_doc(doc: &str) -> Vec<String> {
    let mut cleaned = doc
        .replace("\\t", " ")
        .replace("\\n", " ")
        .replace("\\r", " ");
    cleaned = cleaned
        .replace(['\n', '\t', '\r'], " ");
    cleaned
        .split_whitespace()
        .filter(|tok| !is_fully_numeric(tok))
        .filter_map(|tok| {
            let lowered = tok.to_lowercase();
            let stripped: String = lowered.chars().filter(|&c| !is_punct(c)).collect();
            if stripped.is_empty() {
                return None;
            }
            let lemma = lemmatize(&stripped);
            if !lemma.is_ascii() || lemma.is_empty() {
                return None;
            }
            Some(lemma)
        })
        .collect()
}
