//! Frozen-model feature extraction for the classification probe.

use serde::{Deserialize, Serialize};
use tanntm_core::{forward, Batch, EncodedDoc, Mat, Mode, ModelConfig, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    /// Deterministic latent mean `z_mu` (dimension K).
    Topic,
    /// Aggregated attention context `c` (dimension H).
    Context,
}

impl FeatureSource {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "topic" => Some(FeatureSource::Topic),
            "context" => Some(FeatureSource::Context),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSource::Topic => "topic",
            FeatureSource::Context => "context",
        }
    }

    pub fn dim(self, cfg: &ModelConfig) -> usize {
        match self {
            FeatureSource::Topic => cfg.topics,
            FeatureSource::Context => cfg.hidden_dim,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("corpus has no labeled, non-empty documents")]
    Unlabeled,
    #[error("{0}")]
    Core(#[from] tanntm_core::CoreError),
}

/// Extracts eval-mode features for every labeled, non-empty document, in
/// corpus order. Eval mode is sampling-free, so repeated calls agree exactly.
pub fn extract_features(
    docs: &[EncodedDoc],
    max_seq_len: usize,
    params: &ModelParams,
    cfg: &ModelConfig,
    source: FeatureSource,
    threads: usize,
) -> Result<(Mat, Vec<u32>), FeatureError> {
    let usable: Vec<&EncodedDoc> = docs
        .iter()
        .filter(|d| !d.is_empty() && d.label.is_some())
        .collect();
    if usable.is_empty() {
        return Err(FeatureError::Unlabeled);
    }
    let dim = source.dim(cfg);
    let mut features = Mat::zeros(usable.len(), dim);
    let mut labels = Vec::with_capacity(usable.len());
    let chunk_size = 256;
    for (chunk_idx, chunk) in usable.chunks(chunk_size).enumerate() {
        let batch = Batch::from_docs(chunk, max_seq_len);
        let trace = forward(&batch, params, cfg, Mode::Eval, threads)?;
        for (i, doc) in chunk.iter().enumerate() {
            let row = chunk_idx * chunk_size + i;
            match source {
                FeatureSource::Topic => features
                    .row_mut(row)
                    .copy_from_slice(trace.z_mu.row(i)),
                FeatureSource::Context => features
                    .row_mut(row)
                    .copy_from_slice(&trace.docs[i].context),
            }
            labels.push(doc.label.expect("filtered to labeled docs"));
        }
    }
    Ok((features, labels))
}
