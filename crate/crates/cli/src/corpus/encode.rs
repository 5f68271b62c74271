//! Token-to-index encoding of pruned documents.

use tanntm_core::EncodedDoc;

use super::vocab::Vocabulary;

/// Maps tokens to vocabulary indices; out-of-vocabulary tokens are dropped so
/// the sequence and the BoW describe the same word multiset.
pub fn encode_doc(tokens: &[String], vocab: &Vocabulary) -> Vec<u32> {
    tokens
        .iter()
        .filter_map(|t| vocab.index_of(t))
        .collect()
}

/// Encodes the training split; documents that become empty are removed.
pub fn encode_train_split(
    pruned: &[Vec<String>],
    labels: &[Option<u32>],
    vocab: &Vocabulary,
) -> Vec<EncodedDoc> {
    pruned
        .iter()
        .zip(labels.iter())
        .filter_map(|(tokens, &label)| {
            let ids = encode_doc(tokens, vocab);
            if ids.is_empty() {
                None
            } else {
                Some(EncodedDoc::from_ids(ids, label))
            }
        })
        .collect()
}

/// Encodes the test split; documents that become empty are kept with an empty
/// id list as the flag, so downstream consumers can skip or report them.
pub fn encode_test_split(
    pruned: &[Vec<String>],
    labels: &[Option<u32>],
    vocab: &Vocabulary,
) -> Vec<EncodedDoc> {
    pruned
        .iter()
        .zip(labels.iter())
        .map(|(tokens, &label)| EncodedDoc::from_ids(encode_doc(tokens, vocab), label))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_indexed(
            vec!["cat".into(), "dog".into()],
            vec![5, 3],
        )
    }

    #[test]
    fn oov_tokens_dropped() {
        let tokens: Vec<String> = ["cat", "UNKNOWNTOK", "dog"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(encode_doc(&tokens, &vocab()), vec![1, 2]);
    }

    #[test]
    fn empty_docs_removed_from_train_flagged_in_test() {
        let pruned = vec![
            vec!["cat".to_string()],
            vec!["zzz".to_string()], // fully OOV
            vec![],
        ];
        let labels = vec![Some(0), Some(1), Some(2)];
        let train = encode_train_split(&pruned, &labels, &vocab());
        assert_eq!(train.len(), 1);
        assert_eq!(train[0].label, Some(0));

        let test = encode_test_split(&pruned, &labels, &vocab());
        assert_eq!(test.len(), 3);
        assert!(!test[0].is_empty());
        assert!(test[1].is_empty());
        assert!(test[2].is_empty());
        assert_eq!(test[1].label, Some(1));
    }

    #[test]
    fn decode_reproduces_in_vocab_subsequence() {
        let v = vocab();
        let tokens: Vec<String> = ["dog", "bird", "cat", "cat", "fish"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let ids = encode_doc(&tokens, &v);
        let decoded: Vec<&str> = ids.iter().map(|&i| v.token(i)).collect();
        let expected: Vec<&str> = tokens
            .iter()
            .filter(|t| v.index_of(t).is_some())
            .map(|s| s.as_str())
            .collect();
        assert_eq!(decoded, expected);
    }
}
