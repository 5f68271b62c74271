//! Encoded documents and mini-batch assembly.
//!
//! Vocabulary indices are 1-based; index 0 is reserved for padding. Bags of
//! words are stored sparsely as `(index, count)` pairs sorted by index and
//! are always built from the full, untruncated id sequence — only the
//! sequence branch is padded/truncated for the encoder.

use alloc::vec;
use alloc::vec::Vec;

/// One preprocessed document: id sequence (pre-padding), sparse BoW, label.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedDoc {
    pub ids: Vec<u32>,
    /// Sparse counts over vocabulary indices (1-based), sorted by index.
    pub bow: Vec<(u32, u32)>,
    pub label: Option<u32>,
}

impl EncodedDoc {
    /// Builds the BoW from the ids themselves.
    pub fn from_ids(ids: Vec<u32>, label: Option<u32>) -> Self {
        let bow = bow_counts(&ids);
        Self { ids, bow, label }
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Total token count, i.e. `sum(bow)`.
    pub fn bow_sum(&self) -> u64 {
        self.bow.iter().map(|&(_, c)| c as u64).sum()
    }
}

/// Sparse multiset counts of an id sequence, sorted by index.
pub fn bow_counts(ids: &[u32]) -> Vec<(u32, u32)> {
    let mut sorted: Vec<u32> = ids.iter().copied().filter(|&i| i != 0).collect();
    sorted.sort_unstable();
    let mut out: Vec<(u32, u32)> = Vec::new();
    for id in sorted {
        match out.last_mut() {
            Some((last, c)) if *last == id => *c += 1,
            _ => out.push((id, 1)),
        }
    }
    out
}

/// Dense count vector of length `vocab_size`; position `i` holds the count of
/// vocabulary index `i + 1` (index 0 is padding and is never counted).
pub fn bow_vectorize(ids: &[u32], vocab_size: usize) -> Vec<u32> {
    let mut out = vec![0u32; vocab_size];
    for &id in ids {
        if id == 0 {
            continue;
        }
        let slot = (id - 1) as usize;
        assert!(slot < vocab_size, "id {id} outside vocabulary of {vocab_size}");
        out[slot] += 1;
    }
    out
}

/// Right-pads with index 0 to `max_len`, truncating longer sequences to their
/// first `max_len` ids. Returns the padded sequence plus the true
/// (post-truncation) length used for masking.
pub fn pad_or_truncate(ids: &[u32], max_len: usize) -> (Vec<u32>, usize) {
    let len = ids.len().min(max_len);
    let mut out = Vec::with_capacity(max_len);
    out.extend_from_slice(&ids[..len]);
    out.resize(max_len, 0);
    (out, len)
}

/// A padded mini-batch view over encoded documents.
#[derive(Clone, Debug)]
pub struct Batch {
    /// Flattened `size x max_seq_len` padded id matrix.
    ids: Vec<u32>,
    /// True sequence lengths after truncation.
    lens: Vec<usize>,
    /// Sparse BoW per document (untruncated counts).
    bows: Vec<Vec<(u32, u32)>>,
    bow_sums: Vec<f64>,
    labels: Vec<Option<u32>>,
    max_seq_len: usize,
}

impl Batch {
    /// Assembles a batch. Documents must be non-empty; empty ones are a
    /// pipeline bug and panic in debug builds.
    pub fn from_docs(docs: &[&EncodedDoc], max_seq_len: usize) -> Self {
        assert!(max_seq_len > 0);
        let mut ids = Vec::with_capacity(docs.len() * max_seq_len);
        let mut lens = Vec::with_capacity(docs.len());
        let mut bows = Vec::with_capacity(docs.len());
        let mut bow_sums = Vec::with_capacity(docs.len());
        let mut labels = Vec::with_capacity(docs.len());
        for doc in docs {
            debug_assert!(!doc.is_empty(), "empty document reached batch assembly");
            let (padded, len) = pad_or_truncate(&doc.ids, max_seq_len);
            ids.extend_from_slice(&padded);
            lens.push(len);
            bows.push(doc.bow.clone());
            bow_sums.push(doc.bow_sum() as f64);
            labels.push(doc.label);
        }
        Self {
            ids,
            lens,
            bows,
            bow_sums,
            labels,
            max_seq_len,
        }
    }

    pub fn size(&self) -> usize {
        self.lens.len()
    }

    pub fn max_seq_len(&self) -> usize {
        self.max_seq_len
    }

    /// Padded id row of document `d`.
    pub fn ids(&self, d: usize) -> &[u32] {
        &self.ids[d * self.max_seq_len..(d + 1) * self.max_seq_len]
    }

    pub fn len_of(&self, d: usize) -> usize {
        self.lens[d]
    }

    pub fn bow(&self, d: usize) -> &[(u32, u32)] {
        &self.bows[d]
    }

    pub fn bow_sum(&self, d: usize) -> f64 {
        self.bow_sums[d]
    }

    pub fn label(&self, d: usize) -> Option<u32> {
        self.labels[d]
    }
}
