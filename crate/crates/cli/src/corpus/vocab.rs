//! Vocabulary construction: occurrence counting, frequency filtering, and
//! deterministic index assignment.

use std::collections::HashMap;

use super::stopwords::is_stopword;
use super::CorpusError;

/// Bijection between tokens and the indices `1..=len`; index 0 is padding.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,   // tokens[i] has index i+1
    counts: Vec<u64>,      // aligned with tokens
    lookup: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_indexed(tokens: Vec<String>, counts: Vec<u64>) -> Self {
        assert_eq!(tokens.len(), counts.len());
        let lookup = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), (i + 1) as u32))
            .collect();
        Self {
            tokens,
            counts,
            lookup,
        }
    }

    /// Number of real tokens, excluding padding.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Entry count including the reserved padding index.
    pub fn size_with_pad(&self) -> usize {
        self.tokens.len() + 1
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.lookup.get(token).copied()
    }

    /// Token for index `i` (1-based). Panics on 0 (padding has no token).
    pub fn token(&self, index: u32) -> &str {
        assert!(index >= 1, "padding index has no token");
        &self.tokens[(index - 1) as usize]
    }

    pub fn count(&self, index: u32) -> u64 {
        self.counts[(index - 1) as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str, u64)> {
        self.tokens
            .iter()
            .zip(self.counts.iter())
            .enumerate()
            .map(|(i, (t, &c))| ((i + 1) as u32, t.as_str(), c))
    }
}

/// Counts tokens over pruned training documents, drops tokens outside the
/// length bounds or on the stopword list, filters by total occurrence count
/// (`num_below`) and by document-frequency fraction (`fr_abv`), applies the
/// optional cap (most frequent kept), and assigns indices in descending count
/// order with lexicographic ties.
pub fn build_vocabulary(
    pruned_train: &[Vec<String>],
    num_below: u64,
    fr_abv: f64,
    max_vocab: Option<usize>,
    min_token_len: usize,
    max_token_len: usize,
) -> Result<Vocabulary, CorpusError> {
    if pruned_train.is_empty() {
        return Err(CorpusError::EmptyVocabulary);
    }
    let num_docs = pruned_train.len() as f64;
    // (total occurrences, documents containing the token)
    let mut counts: HashMap<&str, (u64, u64)> = HashMap::new();
    for doc in pruned_train {
        let mut last_doc_mark: HashMap<&str, ()> = HashMap::new();
        for tok in doc {
            let len = tok.len();
            if len < min_token_len || len > max_token_len || is_stopword(tok) {
                continue;
            }
            let entry = counts.entry(tok.as_str()).or_insert((0, 0));
            entry.0 += 1;
            if last_doc_mark.insert(tok.as_str(), ()).is_none() {
                entry.1 += 1;
            }
        }
    }

    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, (total, docs))| {
            total >= num_below && (docs as f64 / num_docs) <= fr_abv
        })
        .map(|(tok, (total, _))| (tok, total))
        .collect();
    // Descending count, ties by token, so indices are reproducible across
    // runs and platforms.
    kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if let Some(cap) = max_vocab {
        kept.truncate(cap);
    }
    if kept.is_empty() {
        return Err(CorpusError::EmptyVocabulary);
    }
    let tokens: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
    let token_counts: Vec<u64> = kept.iter().map(|&(_, c)| c).collect();
    Ok(Vocabulary::from_indexed(tokens, token_counts))
}
