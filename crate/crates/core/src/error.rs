//! Error type for the model/evaluation layer.

use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A configuration invariant was violated.
    InvalidConfig(&'static str),
    /// A token index fell outside the vocabulary (plus pad) range.
    IndexOutOfRange { index: u32, limit: usize },
    /// A document reached the model with an empty bag of words.
    EmptyBagOfWords,
    /// Every position of a document was padding.
    AllPositionsPadded,
    /// A loss or intermediate value became non-finite.
    NonFinite(&'static str),
    /// Requested more top words than the vocabulary holds.
    TopWordsExceedVocab { requested: usize, vocab: usize },
    /// The probe was handed unusable labels.
    DegenerateLabels(&'static str),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            CoreError::IndexOutOfRange { index, limit } => {
                write!(f, "token index {index} out of range (limit {limit})")
            }
            CoreError::EmptyBagOfWords => write!(f, "document has an empty bag of words"),
            CoreError::AllPositionsPadded => write!(f, "all sequence positions are padding"),
            CoreError::NonFinite(what) => write!(f, "non-finite value in {what}"),
            CoreError::TopWordsExceedVocab { requested, vocab } => {
                write!(f, "requested {requested} top words from a {vocab}-word vocabulary")
            }
            CoreError::DegenerateLabels(msg) => write!(f, "degenerate labels: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}
