//! NPMI topic coherence from sliding-window co-occurrence counts.
//!
//! A window is any contiguous span of `window` tokens (documents shorter than
//! the window contribute one whole-document window); presence within a window
//! is boolean. For tracked words the per-document window sets are unions of
//! intervals of window start positions, so word and pair counts come from
//! interval measure/intersection instead of enumerating windows.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::numeric::ln;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowSpec {
    /// Sliding window of this many tokens (at least 2).
    Tokens(usize),
    /// Each document is a single window.
    Document,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceConfig {
    /// Words per topic entering the pair average.
    pub top_l: usize,
    pub window: WindowSpec,
    /// Smoothing added inside the joint probability of observed pairs.
    pub epsilon: f64,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        Self {
            top_l: 10,
            window: WindowSpec::Tokens(10),
            epsilon: 1e-12,
        }
    }
}

impl CoherenceConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.top_l < 2 {
            return Err(CoreError::InvalidConfig("top_l must be at least 2"));
        }
        if let WindowSpec::Tokens(w) = self.window {
            if w < 2 {
                return Err(CoreError::InvalidConfig("window must be at least 2 tokens"));
            }
        }
        Ok(())
    }
}

/// Window-level boolean occurrence counts for a tracked word set.
#[derive(Clone, Debug, Default)]
pub struct CooccurrenceCounts {
    pub total_windows: u64,
    word: BTreeMap<u32, u64>,
    pair: BTreeMap<(u32, u32), u64>,
}

impl CooccurrenceCounts {
    pub fn word_count(&self, w: u32) -> u64 {
        self.word.get(&w).copied().unwrap_or(0)
    }

    pub fn pair_count(&self, a: u32, b: u32) -> u64 {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.pair.get(&key).copied().unwrap_or(0)
    }
}

fn merge_intervals(sorted: &mut Vec<(u64, u64)>) {
    let mut out: Vec<(u64, u64)> = Vec::with_capacity(sorted.len());
    for &(s, e) in sorted.iter() {
        match out.last_mut() {
            Some((_, pe)) if s <= *pe + 1 => *pe = (*pe).max(e),
            _ => out.push((s, e)),
        }
    }
    *sorted = out;
}

fn measure(intervals: &[(u64, u64)]) -> u64 {
    intervals.iter().map(|&(s, e)| e - s + 1).sum()
}

fn intersect_measure(a: &[(u64, u64)], b: &[(u64, u64)]) -> u64 {
    let (mut i, mut j) = (0, 0);
    let mut total = 0;
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if lo <= hi {
            total += hi - lo + 1;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// Counts windows containing each tracked word and each tracked pair.
pub fn count_cooccurrence<'a>(
    docs: impl IntoIterator<Item = &'a [u32]>,
    tracked: &BTreeSet<u32>,
    window: WindowSpec,
) -> CooccurrenceCounts {
    let mut counts = CooccurrenceCounts::default();
    for doc in docs {
        let n = doc.len();
        if n == 0 {
            continue;
        }
        match window {
            WindowSpec::Document => {
                counts.total_windows += 1;
                let present: BTreeSet<u32> = doc
                    .iter()
                    .copied()
                    .filter(|w| tracked.contains(w))
                    .collect();
                let words: Vec<u32> = present.into_iter().collect();
                for (i, &a) in words.iter().enumerate() {
                    *counts.word.entry(a).or_insert(0) += 1;
                    for &b in &words[i + 1..] {
                        *counts.pair.entry((a, b)).or_insert(0) += 1;
                    }
                }
            }
            WindowSpec::Tokens(w) => {
                let num_windows = if n <= w { 1 } else { (n - w + 1) as u64 };
                counts.total_windows += num_windows;
                let last_start = num_windows - 1;
                // Window starts covering an occurrence at position p:
                // [max(0, p-w+1), min(p, last_start)].
                let mut intervals: BTreeMap<u32, Vec<(u64, u64)>> = BTreeMap::new();
                for (p, &tok) in doc.iter().enumerate() {
                    if !tracked.contains(&tok) {
                        continue;
                    }
                    let lo = (p + 1).saturating_sub(w) as u64;
                    let hi = (p as u64).min(last_start);
                    intervals.entry(tok).or_default().push((lo, hi));
                }
                let mut merged: Vec<(u32, Vec<(u64, u64)>)> = Vec::with_capacity(intervals.len());
                for (tok, mut iv) in intervals {
                    merge_intervals(&mut iv);
                    *counts.word.entry(tok).or_insert(0) += measure(&iv);
                    merged.push((tok, iv));
                }
                for i in 0..merged.len() {
                    for j in i + 1..merged.len() {
                        let shared = intersect_measure(&merged[i].1, &merged[j].1);
                        if shared > 0 {
                            *counts
                                .pair
                                .entry((merged[i].0, merged[j].0))
                                .or_insert(0) += shared;
                        }
                    }
                }
            }
        }
    }
    counts
}

/// NPMI of one unordered pair under the counted reference.
///
/// Never-co-occurring pairs score exactly −1; pairs present in every window
/// score exactly 1; otherwise
/// `ln((p_ab + eps) / (p_a p_b)) / (−ln(p_ab + eps))`, clamped to [−1, 1].
pub fn npmi_pair(counts: &CooccurrenceCounts, a: u32, b: u32, epsilon: f64) -> f64 {
    let joint = counts.pair_count(a, b);
    if joint == 0 {
        return -1.0;
    }
    let total = counts.total_windows as f64;
    if joint == counts.total_windows {
        return 1.0;
    }
    let p_ab = joint as f64 / total + epsilon;
    let p_a = counts.word_count(a) as f64 / total;
    let p_b = counts.word_count(b) as f64 / total;
    let val = ln(p_ab / (p_a * p_b)) / -ln(p_ab);
    val.clamp(-1.0, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopicCoherence {
    /// The topic's top words (vocabulary indices).
    pub words: Vec<u32>,
    pub npmi: f64,
    /// Top words absent from the reference corpus (their pairs scored −1).
    pub missing: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceReport {
    pub topics: Vec<TopicCoherence>,
    /// Arithmetic mean of the per-topic scores.
    pub mean_npmi: f64,
    pub config: CoherenceConfig,
}

/// Scores each topic's top words against a reference corpus: the topic score
/// is the mean NPMI over all unordered pairs, the report mean the arithmetic
/// mean over topics.
pub fn npmi_coherence<'a>(
    topics: &[Vec<u32>],
    reference: impl IntoIterator<Item = &'a [u32]>,
    config: &CoherenceConfig,
) -> Result<CoherenceReport, CoreError> {
    config.validate()?;
    let tracked: BTreeSet<u32> = topics.iter().flatten().copied().collect();
    let counts = count_cooccurrence(reference, &tracked, config.window);

    let mut out = Vec::with_capacity(topics.len());
    let mut sum = 0.0;
    for words in topics {
        let take = words.len().min(config.top_l);
        let words = &words[..take];
        let mut pair_sum = 0.0;
        let mut pairs = 0u32;
        for (i, &a) in words.iter().enumerate() {
            for &b in &words[i + 1..] {
                pair_sum += npmi_pair(&counts, a, b, config.epsilon);
                pairs += 1;
            }
        }
        let npmi = if pairs == 0 { 0.0 } else { pair_sum / pairs as f64 };
        let missing: Vec<u32> = words
            .iter()
            .copied()
            .filter(|&w| counts.word_count(w) == 0)
            .collect();
        sum += npmi;
        out.push(TopicCoherence {
            words: words.to_vec(),
            npmi,
            missing,
        });
    }
    let mean = if out.is_empty() { 0.0 } else { sum / out.len() as f64 };
    Ok(CoherenceReport {
        topics: out,
        mean_npmi: mean,
        config: config.clone(),
    })
}
