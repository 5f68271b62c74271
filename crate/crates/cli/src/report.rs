//! Human- and script-facing report formats: coherence JSON, topics TSV,
//! classification JSON.

use serde::{Deserialize, Serialize};
use tanntm_core::npmi::CoherenceReport;
use tanntm_core::WindowSpec;

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct TopicEntry {
    pub topic: usize,
    pub npmi: f64,
    pub words: Vec<String>,
    /// Top words absent from the reference corpus.
    pub missing: Vec<String>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct CoherenceJson {
    pub dataset: Option<String>,
    pub variant: String,
    pub topics_count: usize,
    pub top_l: usize,
    /// "N tokens" or "document".
    pub window: String,
    pub epsilon: f64,
    pub reference: String,
    pub mean_npmi: f64,
    pub topics: Vec<TopicEntry>,
}

pub fn window_label(w: WindowSpec) -> String {
    match w {
        WindowSpec::Tokens(n) => format!("{n} tokens"),
        WindowSpec::Document => "document".to_string(),
    }
}

/// Resolves a core coherence report's word indices to tokens.
pub fn coherence_json(
    report: &CoherenceReport,
    tokens: &[String],
    dataset: Option<String>,
    variant: &str,
    reference: &str,
) -> CoherenceJson {
    let resolve = |ids: &[u32]| -> Vec<String> {
        ids.iter()
            .map(|&i| tokens[(i - 1) as usize].clone())
            .collect()
    };
    CoherenceJson {
        dataset,
        variant: variant.to_string(),
        topics_count: report.topics.len(),
        top_l: report.config.top_l,
        window: window_label(report.config.window),
        epsilon: report.config.epsilon,
        reference: reference.to_string(),
        mean_npmi: report.mean_npmi,
        topics: report
            .topics
            .iter()
            .enumerate()
            .map(|(i, t)| TopicEntry {
                topic: i,
                npmi: t.npmi,
                words: resolve(&t.words),
                missing: resolve(&t.missing),
            })
            .collect(),
    }
}

/// One row per topic: the topic id followed by its top words.
pub fn topics_tsv(top_words: &[Vec<u32>], tokens: &[String]) -> String {
    let mut out = String::new();
    for (k, words) in top_words.iter().enumerate() {
        out.push_str(&k.to_string());
        for &w in words {
            out.push('\t');
            out.push_str(&tokens[(w - 1) as usize]);
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ClassifyJson {
    pub dataset: Option<String>,
    pub variant: String,
    pub source: String,
    pub feature_dim: usize,
    pub classes: usize,
    pub train_docs: usize,
    pub test_docs: usize,
    pub accuracy_percent: f64,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use tanntm_core::npmi::{CoherenceConfig, TopicCoherence};

    #[test]
    fn tsv_layout() {
        let tokens: Vec<String> = ["alpha", "beta", "gamma"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let tsv = topics_tsv(&[vec![2, 1], vec![3, 3]], &tokens);
        assert_eq!(tsv, "0\tbeta\talpha\n1\tgamma\tgamma\n");
    }

    #[test]
    fn json_resolves_tokens() {
        let report = CoherenceReport {
            topics: vec![TopicCoherence {
                words: vec![1, 3],
                npmi: 0.5,
                missing: vec![3],
            }],
            mean_npmi: 0.5,
            config: CoherenceConfig::default(),
        };
        let tokens: Vec<String> = ["one", "two", "three"].iter().map(|s| s.to_string()).collect();
        let json = coherence_json(&report, &tokens, Some("20ng".into()), "ttan", "train split");
        assert_eq!(json.topics[0].words, vec!["one", "three"]);
        assert_eq!(json.topics[0].missing, vec!["three"]);
        assert_eq!(json.window, "10 tokens");
    }
}
