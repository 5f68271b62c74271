//! Experiment recipes: one TOML file drives preprocess → train →
//! eval-coherence → export-topics (→ classify), with stage-level resume
//! backed by a hash manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tanntm_core::{TrainConfig, Variant};

use crate::commands::{
    cmd_classify, cmd_eval_coherence, cmd_export_topics, cmd_preprocess, cmd_train, parse_window,
    ClassifyArgsResolved, ReferenceSplit, TrainArgsResolved,
};
use crate::corpus::{store, Dataset};
use crate::features::FeatureSource;

/// Root directory override for relative artifact paths.
pub const ARTIFACT_ROOT_ENV: &str = "TANNTM_ARTIFACTS";

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub name: String,
    pub seed: u64,
    pub dataset: String,
    pub paths: PathsSection,
    #[serde(default)]
    pub preprocess: PreprocessSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub coherence: CoherenceSection,
    #[serde(default)]
    pub probe: Option<ProbeSection>,
    #[serde(default)]
    pub ablation: Option<AblationSection>,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub input: PathBuf,
    pub artifacts: PathBuf,
    #[serde(default)]
    pub glove: Option<PathBuf>,
}

#[derive(Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSection {
    pub tr_size: Option<usize>,
    pub num_below: Option<u64>,
    pub fr_abv: Option<f64>,
    pub max_vocab: Option<usize>,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_variant")]
    pub variant: String,
    #[serde(default = "default_topics")]
    pub topics: usize,
    #[serde(default = "default_embed")]
    pub embed_dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    #[serde(default = "default_attn")]
    pub attn_dim: usize,
    #[serde(default = "default_dropout")]
    pub dropout_rate: f64,
    #[serde(default)]
    pub prior_alpha: Option<f64>,
    /// Skip pretrained embeddings even when paths.glove is set
    /// (the "w/o GloVe" ablation).
    #[serde(default)]
    pub no_glove: bool,
}

fn default_variant() -> String {
    "ttan".into()
}
fn default_topics() -> usize {
    50
}
fn default_embed() -> usize {
    200
}
fn default_hidden() -> usize {
    450
}
fn default_attn() -> usize {
    350
}
fn default_dropout() -> f64 {
    0.6
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            variant: default_variant(),
            topics: default_topics(),
            embed_dim: default_embed(),
            hidden_dim: default_hidden(),
            attn_dim: default_attn(),
            dropout_rate: default_dropout(),
            prior_alpha: None,
            no_glove: false,
        }
    }
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "default_init_rate")]
    pub init_rate: f64,
}

fn default_epochs() -> usize {
    200
}
fn default_batch() -> usize {
    100
}
fn default_checkpoint_every() -> usize {
    10
}
fn default_eval_every() -> usize {
    10
}
fn default_init_rate() -> f64 {
    0.002
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch(),
            threads: 0,
            checkpoint_every: default_checkpoint_every(),
            eval_every: default_eval_every(),
            init_rate: default_init_rate(),
        }
    }
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct CoherenceSection {
    #[serde(default = "default_top")]
    pub top: usize,
    /// Token count or "doc".
    #[serde(default = "default_window")]
    pub window: String,
    /// Split(s) supplying co-occurrence counts: train, test, or both.
    #[serde(default = "default_reference")]
    pub reference: String,
}

fn default_reference() -> String {
    "train".into()
}

fn default_top() -> usize {
    10
}
fn default_window() -> String {
    "10".into()
}

impl Default for CoherenceSection {
    fn default() -> Self {
        Self {
            top: default_top(),
            window: default_window(),
            reference: default_reference(),
        }
    }
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    #[serde(default = "default_source")]
    pub source: String,
    #[serde(default = "default_probe_epochs")]
    pub epochs: usize,
    #[serde(default = "default_probe_lr")]
    pub lr: f64,
}

fn default_source() -> String {
    "topic".into()
}
fn default_probe_epochs() -> usize {
    50
}
fn default_probe_lr() -> f64 {
    0.01
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct AblationSection {
    pub variants: Vec<String>,
}

pub fn load_recipe(path: &Path) -> Result<Recipe> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading recipe {}", path.display()))?;
    let recipe: Recipe =
        toml::from_str(&text).with_context(|| format!("parsing recipe {}", path.display()))?;
    Ok(recipe)
}

/// Recorded per completed stage: config digest plus output digests.
#[derive(Serialize, Deserialize, Debug, Clone, Default)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageEntry>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct StageEntry {
    pub config_sha256: String,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    fn load(path: &Path) -> Manifest {
        fs::read_to_string(path)
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok())
            .unwrap_or_default()
    }

    fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

fn sha_of(text: &str) -> String {
    store::hex(&Sha256::digest(text.as_bytes()))
}

/// A stage may be skipped when resuming iff its config digest matches and all
/// recorded outputs still hash the same.
fn stage_complete(manifest: &Manifest, root: &Path, stage: &str, config_sha: &str) -> bool {
    let Some(entry) = manifest.stages.get(stage) else {
        return false;
    };
    if entry.config_sha256 != config_sha {
        return false;
    }
    entry.outputs.iter().all(|(rel, sha)| {
        let path = root.join(rel);
        path.exists() && store::sha256_file(&path).map(|h| &h == sha).unwrap_or(false)
    })
}

fn record_stage(
    manifest: &mut Manifest,
    root: &Path,
    stage: &str,
    config_sha: String,
    outputs: &[PathBuf],
) -> Result<()> {
    let mut map = BTreeMap::new();
    for path in outputs {
        let rel = path
            .strip_prefix(root)
            .unwrap_or(path)
            .to_string_lossy()
            .to_string();
        map.insert(rel, store::sha256_file(path)?);
    }
    manifest.stages.insert(
        stage.to_string(),
        StageEntry {
            config_sha256: config_sha,
            outputs: map,
        },
    );
    Ok(())
}

fn resolve_artifacts_dir(recipe: &Recipe) -> PathBuf {
    let p = &recipe.paths.artifacts;
    if p.is_absolute() {
        return p.clone();
    }
    match std::env::var_os(ARTIFACT_ROOT_ENV) {
        Some(root) => PathBuf::from(root).join(p),
        None => p.clone(),
    }
}

#[derive(Serialize, Debug, Clone)]
pub struct VariantOutcome {
    pub variant: String,
    pub mean_npmi: f64,
    pub accuracy_percent: Option<f64>,
}

#[derive(Serialize, Debug, Clone)]
pub struct RunSummary {
    pub name: String,
    pub artifacts: PathBuf,
    pub data_dir: PathBuf,
    pub variants: Vec<VariantOutcome>,
    pub skipped_stages: Vec<String>,
}

/// Executes the recipe. With `resume`, stages whose manifest entries are
/// intact are skipped.
pub fn run_recipe(recipe: &Recipe, resume: bool) -> Result<RunSummary> {
    let dataset = Dataset::parse(&recipe.dataset)
        .with_context(|| format!("unknown dataset `{}`", recipe.dataset))?;
    if !recipe.paths.input.exists() {
        bail!("input path {} does not exist", recipe.paths.input.display());
    }
    if let Some(glove) = &recipe.paths.glove {
        if !recipe.model.no_glove && !glove.exists() {
            bail!("glove path {} does not exist", glove.display());
        }
    }
    let root = resolve_artifacts_dir(recipe);
    fs::create_dir_all(&root)?;
    let manifest_path = root.join("manifest.json");
    let mut manifest = if resume {
        Manifest::load(&manifest_path)
    } else {
        Manifest::default()
    };
    let mut skipped = Vec::new();

    // Stage: preprocess
    let mut pp_cfg = dataset.default_preprocess(recipe.seed);
    if let Some(v) = recipe.preprocess.tr_size {
        pp_cfg.tr_size = v;
    }
    if let Some(v) = recipe.preprocess.num_below {
        pp_cfg.num_below = v;
    }
    if let Some(v) = recipe.preprocess.fr_abv {
        pp_cfg.fr_abv = v;
    }
    if let Some(v) = recipe.preprocess.max_vocab {
        pp_cfg.max_vocab = Some(v);
    }
    let data_dir = root.join("data");
    let pp_sha = sha_of(&format!(
        "preprocess|{}|{}|{}",
        dataset.as_str(),
        recipe.paths.input.display(),
        serde_json::to_string(&pp_cfg)?
    ));
    let data_outputs: Vec<PathBuf> = ["vocab.tsv", "train.jsonl", "test.jsonl", "meta.json"]
        .iter()
        .map(|f| data_dir.join(f))
        .collect();
    if resume && stage_complete(&manifest, &root, "preprocess", &pp_sha) {
        skipped.push("preprocess".to_string());
    } else {
        let summary = cmd_preprocess(dataset, &recipe.paths.input, &data_dir, &pp_cfg)
            .context("preprocess stage failed")?;
        eprintln!(
            "[preprocess] {} train, {} test, vocab {} (+pad)",
            summary.train_docs, summary.test_docs, summary.vocab_size
        );
        record_stage(&mut manifest, &root, "preprocess", pp_sha, &data_outputs)?;
        manifest.save(&manifest_path)?;
    }

    let variants: Vec<String> = match &recipe.ablation {
        Some(ab) => ab.variants.clone(),
        None => vec![recipe.model.variant.clone()],
    };
    let window = parse_window(&recipe.coherence.window)?;
    let reference = ReferenceSplit::parse(&recipe.coherence.reference)
        .with_context(|| format!("unknown reference split `{}`", recipe.coherence.reference))?;
    let mut outcomes = Vec::new();

    for variant_name in &variants {
        let variant = Variant::parse(variant_name)
            .with_context(|| format!("unknown variant `{variant_name}`"))?;
        let vdir = root.join(variant_name);
        fs::create_dir_all(&vdir)?;

        let glove = if recipe.model.no_glove {
            None
        } else {
            recipe.paths.glove.clone()
        };
        let train_args = TrainArgsResolved {
            variant,
            topics: recipe.model.topics,
            embed_dim: recipe.model.embed_dim,
            hidden_dim: recipe.model.hidden_dim,
            attn_dim: recipe.model.attn_dim,
            dropout_rate: recipe.model.dropout_rate,
            prior_alpha: recipe.model.prior_alpha,
            train: TrainConfig {
                batch_size: recipe.train.batch_size,
                epochs: recipe.train.epochs,
                init_rate: recipe.train.init_rate,
                seed: recipe.seed,
                threads: effective_threads(recipe.train.threads),
                checkpoint_every: recipe.train.checkpoint_every,
                ..TrainConfig::default()
            },
            glove,
            eval_every: recipe.train.eval_every,
            resume_from: None,
        };

        // Stage: train
        let stage_train = format!("train/{variant_name}");
        let train_sha = sha_of(&format!(
            "train|{variant_name}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
            recipe.seed,
            recipe.train.epochs,
            recipe.train.batch_size,
            recipe.train.init_rate,
            recipe.model.topics,
            recipe.model.embed_dim,
            recipe.model.hidden_dim,
            recipe.model.attn_dim,
            format_args!(
                "{}|{}|{}",
                recipe.model.dropout_rate,
                recipe.model.no_glove,
                store::vocab_sha256(&data_dir).unwrap_or_default()
            ),
        ));
        let final_ckpt = vdir.join("final.ckpt");
        if resume && stage_complete(&manifest, &root, &stage_train, &train_sha) {
            skipped.push(stage_train.clone());
        } else {
            let summary = cmd_train(&data_dir, &vdir, &train_args)
                .with_context(|| format!("train stage failed ({variant_name})"))?;
            eprintln!(
                "[train/{variant_name}] {} epochs, final loss {:.4}",
                summary.epochs, summary.final_total_loss
            );
            record_stage(
                &mut manifest,
                &root,
                &stage_train,
                train_sha,
                std::slice::from_ref(&final_ckpt),
            )?;
            manifest.save(&manifest_path)?;
        }

        // Stage: eval-coherence
        let stage_eval = format!("eval-coherence/{variant_name}");
        let eval_sha = sha_of(&format!(
            "eval|{variant_name}|{}|{}|{}|{}",
            recipe.coherence.top,
            recipe.coherence.window,
            recipe.coherence.reference,
            store::sha256_file(&final_ckpt)?
        ));
        let coherence_path = vdir.join("coherence.json");
        let mean_npmi = if resume && stage_complete(&manifest, &root, &stage_eval, &eval_sha) {
            skipped.push(stage_eval.clone());
            let text = fs::read_to_string(&coherence_path)?;
            let json: crate::report::CoherenceJson = serde_json::from_str(&text)?;
            json.mean_npmi
        } else {
            let json = cmd_eval_coherence(
                &final_ckpt,
                &data_dir,
                recipe.coherence.top,
                window,
                reference,
                Some(&coherence_path),
            )
            .with_context(|| format!("eval-coherence stage failed ({variant_name})"))?;
            eprintln!("[eval-coherence/{variant_name}] mean NPMI {:.4}", json.mean_npmi);
            record_stage(
                &mut manifest,
                &root,
                &stage_eval,
                eval_sha,
                std::slice::from_ref(&coherence_path),
            )?;
            manifest.save(&manifest_path)?;
            json.mean_npmi
        };

        // Stage: export-topics
        let stage_export = format!("export-topics/{variant_name}");
        let export_sha = sha_of(&format!(
            "export|{variant_name}|{}|{}",
            recipe.coherence.top,
            store::sha256_file(&final_ckpt)?
        ));
        let topics_path = vdir.join("topics.tsv");
        if resume && stage_complete(&manifest, &root, &stage_export, &export_sha) {
            skipped.push(stage_export.clone());
        } else {
            cmd_export_topics(&final_ckpt, recipe.coherence.top, Some(&topics_path))
                .with_context(|| format!("export-topics stage failed ({variant_name})"))?;
            record_stage(
                &mut manifest,
                &root,
                &stage_export,
                export_sha,
                std::slice::from_ref(&topics_path),
            )?;
            manifest.save(&manifest_path)?;
        }

        // Stage: classify (optional)
        let mut accuracy = None;
        if let Some(probe) = &recipe.probe {
            let source = FeatureSource::parse(&probe.source)
                .with_context(|| format!("unknown probe source `{}`", probe.source))?;
            let stage_cls = format!("classify/{variant_name}");
            let cls_sha = sha_of(&format!(
                "classify|{variant_name}|{}|{}|{}|{}",
                probe.source,
                probe.lr,
                probe.epochs,
                store::sha256_file(&final_ckpt)?
            ));
            let cls_path = vdir.join("classify.json");
            if resume && stage_complete(&manifest, &root, &stage_cls, &cls_sha) {
                skipped.push(stage_cls.clone());
                let text = fs::read_to_string(&cls_path)?;
                let json: crate::report::ClassifyJson = serde_json::from_str(&text)?;
                accuracy = Some(json.accuracy_percent);
            } else {
                let json = cmd_classify(
                    &final_ckpt,
                    &data_dir,
                    &ClassifyArgsResolved {
                        source,
                        lr: probe.lr,
                        epochs: probe.epochs,
                        seed: recipe.seed,
                        threads: effective_threads(recipe.train.threads),
                    },
                    Some(&cls_path),
                )
                .with_context(|| format!("classify stage failed ({variant_name})"))?;
                eprintln!(
                    "[classify/{variant_name}] {} features: {:.2}%",
                    json.source, json.accuracy_percent
                );
                record_stage(&mut manifest, &root, &stage_cls, cls_sha, std::slice::from_ref(&cls_path))?;
                manifest.save(&manifest_path)?;
                accuracy = Some(json.accuracy_percent);
            }
        }

        outcomes.push(VariantOutcome {
            variant: variant_name.clone(),
            mean_npmi,
            accuracy_percent: accuracy,
        });
    }

    // Ablation comparison table.
    if variants.len() > 1 {
        let mut table = String::from("variant\tmean_npmi\taccuracy_percent\n");
        for o in &outcomes {
            table.push_str(&format!(
                "{}\t{:.6}\t{}\n",
                o.variant,
                o.mean_npmi,
                o.accuracy_percent
                    .map(|a| format!("{a:.2}"))
                    .unwrap_or_else(|| "-".into())
            ));
        }
        fs::write(root.join("ablation.tsv"), &table)?;
        eprintln!("[ablation] wrote comparison table");
    }

    if outcomes.is_empty() {
        bail!("recipe selected no variants");
    }
    Ok(RunSummary {
        name: recipe.name.clone(),
        artifacts: root,
        data_dir,
        variants: outcomes,
        skipped_stages: skipped,
    })
}

pub fn effective_threads(configured: usize) -> usize {
    if configured > 0 {
        configured
    } else {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    }
}
