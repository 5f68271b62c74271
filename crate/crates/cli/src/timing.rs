//! Forward-pass wall-clock timing.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use tanntm_core::{forward, Batch, Mode, ModelConfig, ModelParams};

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct TimingReport {
    pub dataset: Option<String>,
    pub variant: String,
    pub passes: usize,
    pub warmup: usize,
    pub batch_size: usize,
    pub max_seq_len: usize,
    pub threads: usize,
    pub mean_seconds_per_pass: f64,
    pub total_seconds: f64,
    pub cpu: String,
    pub hardware_threads: usize,
}

pub fn cpu_model() -> String {
    if let Ok(info) = std::fs::read_to_string("/proc/cpuinfo") {
        for line in info.lines() {
            if let Some(rest) = line.strip_prefix("model name") {
                if let Some(name) = rest.split(':').nth(1) {
                    return name.trim().to_string();
                }
            }
        }
    }
    "unknown".to_string()
}

/// Mean wall-clock seconds per full eval-mode forward pass over one batch,
/// after warm-up passes. Run this without competing load.
pub fn time_forward(
    params: &ModelParams,
    cfg: &ModelConfig,
    batch: &Batch,
    passes: usize,
    warmup: usize,
    threads: usize,
    dataset: Option<String>,
) -> TimingReport {
    assert!(passes > 0);
    for _ in 0..warmup {
        let _ = forward(batch, params, cfg, Mode::Eval, threads).expect("warmup forward");
    }
    let start = Instant::now();
    for _ in 0..passes {
        let trace = forward(batch, params, cfg, Mode::Eval, threads).expect("timed forward");
        std::hint::black_box(trace.losses.total);
    }
    let total = start.elapsed().as_secs_f64();
    TimingReport {
        dataset,
        variant: cfg.variant.as_str().to_string(),
        passes,
        warmup,
        batch_size: batch.size(),
        max_seq_len: batch.max_seq_len(),
        threads,
        mean_seconds_per_pass: total / passes as f64,
        total_seconds: total,
        cpu: cpu_model(),
        hardware_threads: std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tanntm_core::{EncodedDoc, Rng, Variant};

    #[test]
    fn reports_positive_mean_and_metadata() {
        let cfg = ModelConfig {
            vocab_size: 10,
            topics: 2,
            embed_dim: 3,
            hidden_dim: 3,
            attn_dim: 2,
            variant: Variant::WTan,
            dropout_rate: 0.0,
            prior_alpha: 0.5,
        };
        let params = ModelParams::init(&cfg, &mut Rng::seed_from_u64(1));
        let docs: Vec<EncodedDoc> = (0..4)
            .map(|_| EncodedDoc::from_ids(vec![1, 2, 3], None))
            .collect();
        let refs: Vec<&EncodedDoc> = docs.iter().collect();
        let batch = Batch::from_docs(&refs, 5);
        let report = time_forward(&params, &cfg, &batch, 3, 1, 1, Some("toy".into()));
        assert!(report.mean_seconds_per_pass > 0.0);
        assert_eq!(report.passes, 3);
        assert_eq!(report.variant, "wtan");
        assert_eq!(report.max_seq_len, 5);
        assert!((report.total_seconds / 3.0 - report.mean_seconds_per_pass).abs() < 1e-12);
    }
}
