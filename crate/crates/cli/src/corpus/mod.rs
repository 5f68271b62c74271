//! Deterministic corpus preprocessing: pruning, vocabulary construction, and
//! dual sequence/BoW encoding.

pub mod encode;
pub mod ingest;
pub mod lemma;
pub mod prune;
pub mod stopwords;
pub mod store;
pub mod vocab;

use serde::{Deserialize, Serialize};
use tanntm_core::{EncodedDoc, Rng};

pub use encode::{encode_doc, encode_test_split, encode_train_split};
pub use prune::prune_doc;
pub use vocab::{build_vocabulary, Vocabulary};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("vocabulary is empty after filtering")]
    EmptyVocabulary,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("invalid preprocessing config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    #[serde(rename = "20ng")]
    TwentyNews,
    AgNews,
    Yrp,
}

impl Dataset {
    pub fn parse(s: &str) -> Option<Dataset> {
        match s {
            "20ng" => Some(Dataset::TwentyNews),
            "agnews" => Some(Dataset::AgNews),
            "yrp" => Some(Dataset::Yrp),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::TwentyNews => "20ng",
            Dataset::AgNews => "agnews",
            Dataset::Yrp => "yrp",
        }
    }

    /// Padding length for the sequence branch.
    pub fn max_seq_len(self) -> usize {
        match self {
            Dataset::AgNews => 50,
            Dataset::TwentyNews | Dataset::Yrp => 200,
        }
    }

    /// Published preprocessing parameters per dataset. The 20NG release is
    /// already preprocessed, so its entry only carries placeholders.
    pub fn default_preprocess(self, seed: u64) -> PreprocessConfig {
        match self {
            Dataset::AgNews => PreprocessConfig {
                tr_size: 96_000,
                num_below: 3,
                fr_abv: 0.7,
                max_vocab: None,
                min_token_len: 3,
                max_token_len: 15,
                seed,
            },
            Dataset::Yrp => PreprocessConfig {
                tr_size: 448_000,
                num_below: 20,
                fr_abv: 0.7,
                max_vocab: Some(20_000),
                min_token_len: 3,
                max_token_len: 15,
                seed,
            },
            Dataset::TwentyNews => PreprocessConfig {
                tr_size: usize::MAX,
                num_below: 1,
                fr_abv: 1.0,
                max_vocab: None,
                min_token_len: 3,
                max_token_len: 15,
                seed,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Number of training documents sampled (seeded) before pruning.
    pub tr_size: usize,
    /// Minimum total occurrence count a token must reach.
    pub num_below: u64,
    /// Maximum average occurrences per training document.
    pub fr_abv: f64,
    /// Keep only this many most-frequent tokens when set.
    pub max_vocab: Option<usize>,
    pub min_token_len: usize,
    pub max_token_len: usize,
    pub seed: u64,
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.fr_abv.is_nan() || self.fr_abv <= 0.0 || self.fr_abv > 1.0 {
            return Err(CorpusError::InvalidConfig("fr_abv must be in (0, 1]"));
        }
        if self.min_token_len > self.max_token_len {
            return Err(CorpusError::InvalidConfig(
                "min_token_len must not exceed max_token_len",
            ));
        }
        if self.tr_size == 0 {
            return Err(CorpusError::InvalidConfig("tr_size must be positive"));
        }
        Ok(())
    }
}

/// Provenance and configuration recorded alongside the encoded corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMeta {
    pub format: u32,
    /// Producing tool and version.
    #[serde(default)]
    pub tool: String,
    pub dataset: Dataset,
    pub seed: u64,
    pub config: PreprocessConfig,
    pub max_seq_len: usize,
    pub lemmatizer: String,
    pub stopwords: String,
    pub stopword_count: usize,
    pub train_docs: usize,
    pub test_docs: usize,
    pub vocab_size: usize,
    /// Documents dropped from the training split for becoming empty.
    pub train_dropped: usize,
    /// Test documents flagged empty (kept, ids == []).
    pub test_flagged: usize,
}

/// Both encoded splits plus the vocabulary they were encoded against.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<EncodedDoc>,
    pub test: Vec<EncodedDoc>,
    pub vocabulary: Vocabulary,
    pub max_seq_len: usize,
    pub meta: SplitMeta,
}

impl CorpusSplit {
    /// Training documents usable as an NPMI reference (full id sequences).
    pub fn train_id_slices(&self) -> Vec<&[u32]> {
        self.train.iter().map(|d| d.ids.as_slice()).collect()
    }
}

/// A raw document before pruning.
#[derive(Clone, Debug)]
pub struct RawDoc {
    pub text: String,
    pub label: Option<u32>,
}

/// Samples `tr_size` documents with the config seed (partial Fisher-Yates
/// over indices, selection kept in corpus order), prunes both splits, builds
/// the vocabulary from pruned training text, and encodes both splits.
pub fn preprocess(
    dataset: Dataset,
    raw_train: &[RawDoc],
    raw_test: &[RawDoc],
    cfg: &PreprocessConfig,
) -> Result<CorpusSplit, CorpusError> {
    cfg.validate()?;
    let mut rng = Rng::seed_from_u64(cfg.seed);
    let selected: Vec<usize> = if cfg.tr_size >= raw_train.len() {
        (0..raw_train.len()).collect()
    } else {
        rng.sample_indices(raw_train.len(), cfg.tr_size)
    };

    let tr_pruned: Vec<Vec<String>> = selected
        .iter()
        .map(|&i| prune_doc(&raw_train[i].text))
        .collect();
    let tr_labels: Vec<Option<u32>> = selected.iter().map(|&i| raw_train[i].label).collect();
    let te_pruned: Vec<Vec<String>> = raw_test.iter().map(|d| prune_doc(&d.text)).collect();
    let te_labels: Vec<Option<u32>> = raw_test.iter().map(|d| d.label).collect();

    let vocabulary = build_vocabulary(
        &tr_pruned,
        cfg.num_below,
        cfg.fr_abv,
        cfg.max_vocab,
        cfg.min_token_len,
        cfg.max_token_len,
    )?;

    let train = encode_train_split(&tr_pruned, &tr_labels, &vocabulary);
    let test = encode_test_split(&te_pruned, &te_labels, &vocabulary);
    let train_dropped = tr_pruned.len() - train.len();
    let test_flagged = test.iter().filter(|d| d.is_empty()).count();

    let meta = SplitMeta {
        format: 1,
        tool: concat!("tanntm ", env!("CARGO_PKG_VERSION")).to_string(),
        dataset,
        seed: cfg.seed,
        config: cfg.clone(),
        max_seq_len: dataset.max_seq_len(),
        lemmatizer: lemma::LEMMATIZER_ID.to_string(),
        stopwords: stopwords::STOPWORDS_ID.to_string(),
        stopword_count: stopwords::count(),
        train_docs: train.len(),
        test_docs: test.len(),
        vocab_size: vocabulary.len(),
        train_dropped,
        test_flagged,
    };

    Ok(CorpusSplit {
        train,
        test,
        vocabulary,
        max_seq_len: dataset.max_seq_len(),
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_padding_lengths() {
        assert_eq!(Dataset::AgNews.max_seq_len(), 50);
        assert_eq!(Dataset::TwentyNews.max_seq_len(), 200);
        assert_eq!(Dataset::Yrp.max_seq_len(), 200);
    }

    #[test]
    fn published_preprocess_parameters() {
        let ag = Dataset::AgNews.default_preprocess(1);
        assert_eq!((ag.tr_size, ag.num_below, ag.fr_abv), (96_000, 3, 0.7));
        assert_eq!(ag.max_vocab, None);
        let yrp = Dataset::Yrp.default_preprocess(1);
        assert_eq!((yrp.tr_size, yrp.num_below, yrp.fr_abv), (448_000, 20, 0.7));
        assert_eq!(yrp.max_vocab, Some(20_000));
        for d in [Dataset::AgNews, Dataset::Yrp, Dataset::TwentyNews] {
            let cfg = d.default_preprocess(1);
            assert_eq!((cfg.min_token_len, cfg.max_token_len), (3, 15));
            assert!(cfg.validate().is_ok());
        }
    }

    #[test]
    fn dataset_names_round_trip() {
        for d in [Dataset::TwentyNews, Dataset::AgNews, Dataset::Yrp] {
            assert_eq!(Dataset::parse(d.as_str()), Some(d));
        }
        assert_eq!(Dataset::parse("reuters"), None);
    }
}
