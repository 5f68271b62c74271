//! Pretrained embedding initialization from a GloVe text file.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use tanntm_core::ModelParams;

use crate::corpus::Vocabulary;

#[derive(Debug, thiserror::Error)]
pub enum GloveError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: vector has {found} dims, expected {expected}")]
    DimMismatch {
        path: String,
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error("{path}:{line}: unparseable value")]
    BadValue { path: String, line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GloveStats {
    pub found: usize,
    pub missing: usize,
}

/// Overwrites embedding rows for every vocabulary token present in the GloVe
/// file; rows for missing tokens keep their uniform initialization, as does
/// the padding row.
pub fn apply_glove(
    path: &Path,
    vocab: &Vocabulary,
    params: &mut ModelParams,
) -> Result<GloveStats, GloveError> {
    let expected = params.embedding.words.cols();
    let reader = BufReader::new(File::open(path)?);
    let mut found = 0usize;
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_ascii_whitespace();
        let token = match parts.next() {
            Some(t) => t,
            None => continue,
        };
        let Some(index) = vocab.index_of(token) else {
            continue;
        };
        let row = params.embedding.words.row_mut((index - 1) as usize);
        let mut count = 0usize;
        for (i, value) in parts.enumerate() {
            if i >= expected {
                count += 1;
                break;
            }
            row[i] = value.parse().map_err(|_| GloveError::BadValue {
                path: path.display().to_string(),
                line: ln + 1,
            })?;
            count = i + 1;
        }
        if count != expected {
            return Err(GloveError::DimMismatch {
                path: path.display().to_string(),
                line: ln + 1,
                found: count,
                expected,
            });
        }
        found += 1;
    }
    Ok(GloveStats {
        found,
        missing: vocab.len() - found,
    })
}
