//! Property tests over the text pipeline.

use proptest::prelude::*;
use tanntm::corpus::{build_vocabulary, encode_doc, prune_doc};

fn is_fully_numeric(t: &str) -> bool {
    !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Re-pruning pruned output changes nothing except dropping tokens that
    /// are left fully numeric (digit tokens only survive the first pass when
    /// punctuation hid them from the numeric filter).
    #[test]
    fn prune_is_idempotent_modulo_numeric_leftovers(doc in "[ -~\\n\\t\\r]{0,300}") {
        let once = prune_doc(&doc);
        let rejoined = once.join(" ");
        let twice = prune_doc(&rejoined);
        let expected: Vec<String> = once
            .iter()
            .filter(|t| !is_fully_numeric(t))
            .cloned()
            .collect();
        prop_assert_eq!(twice, expected);
    }

    /// For purely alphabetic text pruning is exactly idempotent.
    #[test]
    fn prune_idempotent_on_alphabetic_text(doc in "[a-zA-Z .,!?]{0,300}") {
        let once = prune_doc(&doc);
        let twice = prune_doc(&once.join(" "));
        prop_assert_eq!(once, twice);
    }

    /// Pruned output is always lowercase ASCII with no punctuation and no
    /// empty tokens.
    #[test]
    fn pruned_tokens_are_clean(doc in "\\PC{0,200}") {
        for tok in prune_doc(&doc) {
            prop_assert!(!tok.is_empty());
            prop_assert!(tok.is_ascii());
            prop_assert!(!tok.bytes().any(|b| b.is_ascii_uppercase()));
            prop_assert!(!tok.bytes().any(|b| b.is_ascii_punctuation()));
            prop_assert!(!tok.contains(char::is_whitespace));
        }
    }

    /// Vocabulary indices are contiguous 1..=N and decode(encode(doc))
    /// reproduces exactly the in-vocabulary token subsequence.
    #[test]
    fn vocab_contiguous_and_encode_decode_round_trips(
        docs in proptest::collection::vec(
            proptest::collection::vec("[a-z]{3,10}", 1..20),
            1..12,
        )
    ) {
        let pruned: Vec<Vec<String>> = docs.clone();
        let vocab = match build_vocabulary(&pruned, 1, 1.0, None, 3, 15) {
            Ok(v) => v,
            Err(_) => return Ok(()), // everything filtered (e.g. all stopwords)
        };
        let n = vocab.len() as u32;
        for (idx, tok, _) in vocab.iter() {
            prop_assert!(idx >= 1 && idx <= n);
            prop_assert_eq!(vocab.index_of(tok), Some(idx));
        }
        for doc in &pruned {
            let ids = encode_doc(doc, &vocab);
            prop_assert!(ids.iter().all(|&i| i >= 1 && i <= n), "no pad, no gaps");
            let decoded: Vec<&str> = ids.iter().map(|&i| vocab.token(i)).collect();
            let expected: Vec<&str> = doc
                .iter()
                .filter(|t| vocab.index_of(t).is_some())
                .map(|s| s.as_str())
                .collect();
            prop_assert_eq!(decoded, expected);
        }
    }

    /// Every BoW entry is a positive count on a real vocabulary index and the
    /// counts conserve the number of in-vocabulary tokens.
    #[test]
    fn bow_entries_positive_and_conserving(
        ids in proptest::collection::vec(0u32..40, 0..60)
    ) {
        let bow = tanntm_core::bow_counts(&ids);
        let nonpad = ids.iter().filter(|&&i| i != 0).count() as u64;
        let total: u64 = bow.iter().map(|&(_, c)| c as u64).sum();
        prop_assert_eq!(total, nonpad);
        for &(idx, count) in &bow {
            prop_assert!(idx != 0, "BoW must never reference padding");
            prop_assert!(count > 0);
        }
        let mut sorted = bow.clone();
        sorted.sort_unstable();
        sorted.dedup_by_key(|e| e.0);
        prop_assert_eq!(sorted.len(), bow.len(), "indices unique and sorted");
    }
}
