//! Command implementations behind the CLI subcommands and the recipe runner.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use tanntm_core::npmi::{npmi_coherence, CoherenceConfig};
use tanntm_core::probe::{probe_accuracy, train_probe, ProbeConfig};
use tanntm_core::topwords::top_words;
use tanntm_core::train::Trainer;
use tanntm_core::{
    Batch, CoherenceReport, ModelConfig, ModelParams, Rng, TrainConfig, Variant, WindowSpec,
};

use crate::checkpoint::{self, Checkpoint};
use crate::corpus::{self, store, CorpusSplit, Dataset, PreprocessConfig};
use crate::features::{extract_features, FeatureSource};
use crate::glove::apply_glove;
use crate::report::{coherence_json, topics_tsv, window_label, ClassifyJson, CoherenceJson};
use crate::timing::{time_forward, TimingReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceSplit {
    Train,
    Test,
    Both,
}

impl ReferenceSplit {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(ReferenceSplit::Train),
            "test" => Some(ReferenceSplit::Test),
            "both" => Some(ReferenceSplit::Both),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ReferenceSplit::Train => "train split",
            ReferenceSplit::Test => "test split",
            ReferenceSplit::Both => "train+test splits",
        }
    }

    fn docs(self, split: &CorpusSplit) -> Vec<&[u32]> {
        let mut out: Vec<&[u32]> = Vec::new();
        if matches!(self, ReferenceSplit::Train | ReferenceSplit::Both) {
            out.extend(split.train.iter().map(|d| d.ids.as_slice()));
        }
        if matches!(self, ReferenceSplit::Test | ReferenceSplit::Both) {
            out.extend(
                split
                    .test
                    .iter()
                    .filter(|d| !d.is_empty())
                    .map(|d| d.ids.as_slice()),
            );
        }
        out
    }
}

pub fn parse_window(s: &str) -> Result<WindowSpec> {
    if s == "doc" || s == "document" {
        return Ok(WindowSpec::Document);
    }
    let n: usize = s
        .parse()
        .with_context(|| format!("window must be a token count or `doc`, got `{s}`"))?;
    Ok(WindowSpec::Tokens(n))
}

#[derive(Serialize)]
pub struct PreprocessSummary {
    pub dataset: String,
    pub out: PathBuf,
    pub train_docs: usize,
    pub test_docs: usize,
    pub vocab_size: usize,
    pub vocab_size_with_pad: usize,
    pub train_dropped: usize,
    pub test_flagged: usize,
}

pub fn cmd_preprocess(
    dataset: Dataset,
    input: &Path,
    out: &Path,
    cfg: &PreprocessConfig,
) -> Result<PreprocessSummary> {
    let split = match dataset {
        Dataset::TwentyNews => corpus::ingest::ingest_20ng(input, cfg.seed)
            .with_context(|| format!("ingesting 20ng export from {}", input.display()))?,
        Dataset::AgNews | Dataset::Yrp => {
            let train_path = input.join("train.csv");
            let test_path = input.join("test.csv");
            let raw_train = corpus::ingest::read_labeled_csv(&train_path, dataset)
                .with_context(|| format!("reading {}", train_path.display()))?;
            let raw_test = corpus::ingest::read_labeled_csv(&test_path, dataset)
                .with_context(|| format!("reading {}", test_path.display()))?;
            corpus::preprocess(dataset, &raw_train, &raw_test, cfg)?
        }
    };
    store::save(&split, out)?;
    Ok(PreprocessSummary {
        dataset: dataset.as_str().to_string(),
        out: out.to_path_buf(),
        train_docs: split.meta.train_docs,
        test_docs: split.meta.test_docs,
        vocab_size: split.meta.vocab_size,
        vocab_size_with_pad: split.meta.vocab_size + 1,
        train_dropped: split.meta.train_dropped,
        test_flagged: split.meta.test_flagged,
    })
}

pub struct TrainArgsResolved {
    pub variant: Variant,
    pub topics: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub attn_dim: usize,
    pub dropout_rate: f64,
    pub prior_alpha: Option<f64>,
    pub train: TrainConfig,
    pub glove: Option<PathBuf>,
    /// Epoch interval for coherence tracking of the best checkpoint (0 = off).
    pub eval_every: usize,
    /// Continue a previous run from this checkpoint (parameters, optimizer
    /// moments, RNG state, and counters are all restored).
    pub resume_from: Option<PathBuf>,
}

impl TrainArgsResolved {
    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        let mut cfg = ModelConfig::new(vocab_size, self.variant).with_topics(self.topics);
        cfg.embed_dim = self.embed_dim;
        cfg.hidden_dim = self.hidden_dim;
        cfg.attn_dim = self.attn_dim;
        cfg.dropout_rate = self.dropout_rate;
        if let Some(alpha) = self.prior_alpha {
            cfg.prior_alpha = alpha;
        }
        cfg
    }
}

#[derive(Serialize)]
pub struct TrainSummary {
    pub variant: String,
    pub epochs: usize,
    pub final_checkpoint: PathBuf,
    pub best_checkpoint: Option<PathBuf>,
    pub best_npmi: Option<f64>,
    pub log: PathBuf,
    pub final_total_loss: f64,
    pub glove_found: Option<usize>,
    pub glove_missing: Option<usize>,
}

fn make_checkpoint(
    split: &CorpusSplit,
    vocab_sha: &str,
    model_cfg: &ModelConfig,
    params: &ModelParams,
    optimizer: &tanntm_core::adam::Adam,
    rng_state: [u64; 4],
    state: tanntm_core::train::TrainState,
) -> Checkpoint {
    let (m, v) = optimizer.moments();
    Checkpoint {
        model: model_cfg.clone(),
        params: params.clone(),
        dataset: Some(split.meta.dataset.as_str().to_string()),
        vocab_sha256: vocab_sha.to_string(),
        vocab_tokens: split.vocabulary.tokens().to_vec(),
        max_seq_len: split.max_seq_len,
        state,
        rng_state,
        adam: Some((optimizer.step_count(), m.to_vec(), v.to_vec())),
    }
}

/// Quick NPMI of the current topics against the training split, used to track
/// the best checkpoint during training.
fn quick_npmi(params: &ModelParams, split: &CorpusSplit) -> Result<f64> {
    let t_w = tanntm_core::model::ops::topic_word_distribution(&params.decoder.w);
    let tops = top_words(&t_w, 10.min(t_w.cols()))?;
    let refs = split.train_id_slices();
    let report = npmi_coherence(&tops, refs.iter().copied(), &CoherenceConfig::default())?;
    Ok(report.mean_npmi)
}

pub fn cmd_train(data: &Path, out: &Path, args: &TrainArgsResolved) -> Result<TrainSummary> {
    let split = store::load(data).with_context(|| format!("loading corpus {}", data.display()))?;
    let vocab_sha = store::vocab_sha256(data)?;
    if split.train.is_empty() {
        bail!("training split is empty");
    }
    fs::create_dir_all(out)?;

    let model_cfg = args.model_config(split.vocabulary.len());
    model_cfg.validate()?;
    let mut glove_found = None;
    let mut glove_missing = None;

    let (mut params, mut trainer) = if let Some(resume_path) = &args.resume_from {
        let ckpt = checkpoint::load(resume_path)
            .with_context(|| format!("loading resume checkpoint {}", resume_path.display()))?;
        if ckpt.model != model_cfg {
            bail!("resume checkpoint was trained with a different model configuration");
        }
        if ckpt.vocab_sha256 != vocab_sha {
            bail!("resume checkpoint was trained against a different vocabulary");
        }
        let optimizer = ckpt
            .restore_optimizer(
                args.train.adam_beta1,
                args.train.adam_beta2,
                args.train.adam_eps,
            )
            .context("resume checkpoint carries no optimizer state")?;
        let trainer = Trainer::resume(
            model_cfg.clone(),
            args.train.clone(),
            optimizer,
            ckpt.rng_state,
            ckpt.state,
        );
        (ckpt.params, trainer)
    } else {
        let mut init_rng = Rng::seed_from_u64(args.train.seed);
        let mut params = ModelParams::init(&model_cfg, &mut init_rng);
        if let Some(glove_path) = &args.glove {
            let stats = apply_glove(glove_path, &split.vocabulary, &mut params)
                .with_context(|| format!("loading embeddings {}", glove_path.display()))?;
            glove_found = Some(stats.found);
            glove_missing = Some(stats.missing);
        }
        let trainer = Trainer::new(model_cfg.clone(), args.train.clone(), &params);
        (params, trainer)
    };

    let log_path = out.join("train_log.jsonl");
    let mut log = BufWriter::new(if args.resume_from.is_some() && log_path.exists() {
        fs::OpenOptions::new().append(true).open(&log_path)?
    } else {
        File::create(&log_path)?
    });
    let final_path = out.join("final.ckpt");
    let best_path = out.join("best.ckpt");
    let periodic_path = out.join("checkpoint.ckpt");
    let mut best_npmi: Option<f64> = None;
    let mut callback_err: Option<anyhow::Error> = None;
    let eval_every = args.eval_every;

    let records = {
        let split_ref = &split;
        let vocab_sha_ref = vocab_sha.as_str();
        let model_ref = &model_cfg;
        trainer.run(&split.train, split.max_seq_len, &mut params, |snap| {
            let mut work = || -> Result<()> {
                let line = serde_json::json!({
                    "epoch": snap.record.epoch,
                    "step": snap.record.step,
                    "lr": snap.record.lr,
                    "recon": snap.record.recon,
                    "kl": snap.record.kl,
                    "total": snap.record.total,
                });
                writeln!(log, "{line}")?;
                log.flush()?;
                eprintln!(
                    "[epoch {:>4}] total {:.4}  recon {:.4}  kl {:.4}  lr {:.5}",
                    snap.record.epoch,
                    snap.record.total,
                    snap.record.recon,
                    snap.record.kl,
                    snap.record.lr
                );
                if snap.checkpoint_due {
                    let ckpt = make_checkpoint(
                        split_ref,
                        vocab_sha_ref,
                        model_ref,
                        snap.params,
                        snap.optimizer,
                        snap.rng_state,
                        snap.state,
                    );
                    checkpoint::save(&periodic_path, &ckpt)?;
                }
                if eval_every > 0 && snap.state.epoch % eval_every == 0 {
                    let score = quick_npmi(snap.params, split_ref)?;
                    if best_npmi.is_none_or(|b| score > b) {
                        best_npmi = Some(score);
                        let ckpt = make_checkpoint(
                            split_ref,
                            vocab_sha_ref,
                            model_ref,
                            snap.params,
                            snap.optimizer,
                            snap.rng_state,
                            snap.state,
                        );
                        checkpoint::save(&best_path, &ckpt)?;
                    }
                }
                Ok(())
            };
            match work() {
                Ok(()) => ControlFlow::Continue(()),
                Err(e) => {
                    callback_err = Some(e);
                    ControlFlow::Break(())
                }
            }
        })?
    };
    if let Some(e) = callback_err {
        return Err(e.context("training callback failed"));
    }

    let final_ckpt = make_checkpoint(
        &split,
        &vocab_sha,
        &model_cfg,
        &params,
        trainer.optimizer(),
        trainer.rng_state(),
        trainer.state(),
    );
    checkpoint::save(&final_path, &final_ckpt)?;

    Ok(TrainSummary {
        variant: args.variant.as_str().to_string(),
        epochs: records.len(),
        final_checkpoint: final_path,
        best_checkpoint: best_npmi.is_some().then(|| best_path.clone()),
        best_npmi,
        log: log_path,
        final_total_loss: records.last().map(|r| r.total).unwrap_or(f64::NAN),
        glove_found,
        glove_missing,
    })
}

fn load_matching(ckpt_path: &Path, data: &Path) -> Result<(Checkpoint, CorpusSplit)> {
    let ckpt = checkpoint::load(ckpt_path)
        .with_context(|| format!("loading checkpoint {}", ckpt_path.display()))?;
    let split = store::load(data).with_context(|| format!("loading corpus {}", data.display()))?;
    let data_sha = store::vocab_sha256(data)?;
    if ckpt.vocab_sha256 != data_sha {
        bail!(
            "checkpoint was trained against a different vocabulary \
             (checkpoint {}, data {})",
            ckpt.vocab_sha256,
            data_sha
        );
    }
    Ok((ckpt, split))
}

pub fn coherence_core(
    ckpt: &Checkpoint,
    split: &CorpusSplit,
    top: usize,
    window: WindowSpec,
) -> Result<CoherenceReport> {
    coherence_against(ckpt, split, top, window, ReferenceSplit::Train)
}

pub fn coherence_against(
    ckpt: &Checkpoint,
    split: &CorpusSplit,
    top: usize,
    window: WindowSpec,
    reference: ReferenceSplit,
) -> Result<CoherenceReport> {
    let cfg = CoherenceConfig {
        top_l: top,
        window,
        ..CoherenceConfig::default()
    };
    let t_w = tanntm_core::model::ops::topic_word_distribution(&ckpt.params.decoder.w);
    let tops = top_words(&t_w, top)?;
    let refs = reference.docs(split);
    Ok(npmi_coherence(&tops, refs.iter().copied(), &cfg)?)
}

pub fn cmd_eval_coherence(
    ckpt_path: &Path,
    data: &Path,
    top: usize,
    window: WindowSpec,
    reference: ReferenceSplit,
    out: Option<&Path>,
) -> Result<CoherenceJson> {
    let (ckpt, split) = load_matching(ckpt_path, data)?;
    let report = coherence_against(&ckpt, &split, top, window, reference)?;
    let json = coherence_json(
        &report,
        &ckpt.vocab_tokens,
        ckpt.dataset.clone(),
        ckpt.model.variant.as_str(),
        reference.label(),
    );
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(&json)? + "\n")?;
    }
    Ok(json)
}

pub struct ClassifyArgsResolved {
    pub source: FeatureSource,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub threads: usize,
}

pub fn cmd_classify(
    ckpt_path: &Path,
    data: &Path,
    args: &ClassifyArgsResolved,
    out: Option<&Path>,
) -> Result<ClassifyJson> {
    let ClassifyArgsResolved {
        source,
        lr,
        epochs,
        seed,
        threads,
    } = *args;
    let (ckpt, split) = load_matching(ckpt_path, data)?;
    let (train_x, train_y) = extract_features(
        &split.train,
        split.max_seq_len,
        &ckpt.params,
        &ckpt.model,
        source,
        threads,
    )?;
    let (test_x, test_y) = extract_features(
        &split.test,
        split.max_seq_len,
        &ckpt.params,
        &ckpt.model,
        source,
        threads,
    )?;
    let classes = train_y
        .iter()
        .chain(test_y.iter())
        .copied()
        .max()
        .map(|m| m as usize + 1)
        .unwrap_or(0);
    let probe_cfg = ProbeConfig {
        lr,
        epochs,
        seed,
        ..ProbeConfig::default()
    };
    let probe = train_probe(&train_x, &train_y, classes, &probe_cfg)?;
    let accuracy = probe_accuracy(&probe, &test_x, &test_y);
    let json = ClassifyJson {
        dataset: ckpt.dataset.clone(),
        variant: ckpt.model.variant.as_str().to_string(),
        source: source.as_str().to_string(),
        feature_dim: source.dim(&ckpt.model),
        classes,
        train_docs: train_y.len(),
        test_docs: test_y.len(),
        accuracy_percent: accuracy,
        seed,
    };
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(&json)? + "\n")?;
    }
    Ok(json)
}

pub fn cmd_export_topics(ckpt_path: &Path, top: usize, out: Option<&Path>) -> Result<String> {
    let ckpt = checkpoint::load(ckpt_path)
        .with_context(|| format!("loading checkpoint {}", ckpt_path.display()))?;
    let t_w = tanntm_core::model::ops::topic_word_distribution(&ckpt.params.decoder.w);
    let tops = top_words(&t_w, top)?;
    let tsv = topics_tsv(&tops, &ckpt.vocab_tokens);
    if let Some(path) = out {
        fs::write(path, &tsv)?;
    }
    Ok(tsv)
}

pub fn cmd_time(
    ckpt_path: &Path,
    data: &Path,
    passes: usize,
    warmup: usize,
    batch_size: usize,
    threads: usize,
    out: Option<&Path>,
) -> Result<TimingReport> {
    let (ckpt, split) = load_matching(ckpt_path, data)?;
    let docs: Vec<&tanntm_core::EncodedDoc> = split
        .train
        .iter()
        .filter(|d| !d.is_empty())
        .take(batch_size)
        .collect();
    if docs.is_empty() {
        bail!("no usable documents for timing");
    }
    let batch = Batch::from_docs(&docs, split.max_seq_len);
    let report = time_forward(
        &ckpt.params,
        &ckpt.model,
        &batch,
        passes,
        warmup,
        threads,
        ckpt.dataset.clone(),
    );
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(report)
}

/// Echoes the coherence window choice into reports so comparisons stay
/// like-for-like.
pub fn describe_window(window: WindowSpec) -> String {
    window_label(window)
}
