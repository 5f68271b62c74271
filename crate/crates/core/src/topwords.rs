//! Top-probability words per topic.

use alloc::vec::Vec;

use crate::error::CoreError;
use crate::mat::Mat;

/// The `l` highest-probability vocabulary indices of each topic-word row,
/// descending, ties broken by the lower index. Indices are 1-based
/// (vocabulary convention; 0 is padding and never appears).
pub fn top_words(t_w: &Mat, l: usize) -> Result<Vec<Vec<u32>>, CoreError> {
    let vocab = t_w.cols();
    if l > vocab {
        return Err(CoreError::TopWordsExceedVocab {
            requested: l,
            vocab,
        });
    }
    let mut out = Vec::with_capacity(t_w.rows());
    for k in 0..t_w.rows() {
        let row = t_w.row(k);
        let mut idx: Vec<usize> = (0..vocab).collect();
        idx.sort_by(|&a, &b| {
            row[b]
                .partial_cmp(&row[a])
                .expect("non-finite topic-word probability")
                .then(a.cmp(&b))
        });
        out.push(idx[..l].iter().map(|&i| (i + 1) as u32).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_row_leads_with_that_word_then_index_ties() {
        let mut t_w = Mat::zeros(1, 5);
        t_w.set(0, 3, 1.0);
        let tops = top_words(&t_w, 3).unwrap();
        // word 4 (index 3) first, then the zero-probability ties by index
        assert_eq!(tops[0], vec![4, 1, 2]);
    }

    #[test]
    fn no_duplicates_within_topic() {
        let t_w = Mat::from_fn(3, 8, |r, c| ((r * 7 + c * 3) % 5) as f64 * 0.1);
        let tops = top_words(&t_w, 8).unwrap();
        for topic in &tops {
            let mut seen = topic.clone();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), topic.len());
        }
    }

    #[test]
    fn requesting_more_than_vocab_errors() {
        let t_w = Mat::zeros(2, 4);
        assert!(matches!(
            top_words(&t_w, 5),
            Err(CoreError::TopWordsExceedVocab { .. })
        ));
    }

    #[test]
    fn descending_probabilities() {
        let t_w = Mat::from_vec(1, 4, alloc::vec![0.1, 0.4, 0.2, 0.3]);
        assert_eq!(top_words(&t_w, 4).unwrap()[0], alloc::vec![2, 4, 3, 1]);
    }
}
