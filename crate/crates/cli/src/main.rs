use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use tanntm::commands::{
    cmd_classify, cmd_eval_coherence, cmd_export_topics, cmd_preprocess, cmd_time, cmd_train,
    parse_window, ClassifyArgsResolved, ReferenceSplit, TrainArgsResolved,
};
use tanntm::corpus::Dataset;
use tanntm::features::FeatureSource;
use tanntm::recipe::{effective_threads, load_recipe, run_recipe};
use tanntm_core::{TrainConfig, Variant};

/// Topic modeling with topic-guided attention: preprocessing, training,
/// coherence evaluation, classification probes, and reproducible recipes.
#[derive(Parser)]
#[command(name = "tanntm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prune, filter, and encode a raw dataset into a data directory.
    Preprocess(PreprocessArgs),
    /// Train a model variant on a preprocessed data directory.
    Train(TrainArgs),
    /// Score a checkpoint's topics with NPMI coherence.
    EvalCoherence(EvalArgs),
    /// Train a linear probe on frozen features and report test accuracy.
    Classify(ClassifyArgs),
    /// Write the top words of each topic as a TSV table.
    ExportTopics(ExportArgs),
    /// Measure mean forward-pass wall-clock time.
    Time(TimeArgs),
    /// Execute a recipe file end to end with stage-level resume.
    Run(RunArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    /// Dataset kind: 20ng, agnews, or yrp.
    #[arg(long)]
    dataset: String,
    /// Raw input: a directory with train.csv/test.csv (agnews, yrp) or the
    /// pre-tokenized export (20ng).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output data directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Training documents to sample before pruning (dataset default if unset).
    #[arg(long)]
    tr_size: Option<usize>,
    /// Minimum total occurrence count (dataset default if unset).
    #[arg(long)]
    num_below: Option<u64>,
    /// Maximum average occurrences per document (dataset default if unset).
    #[arg(long)]
    fr_abv: Option<f64>,
    /// Keep only this many most-frequent tokens.
    #[arg(long)]
    max_vocab: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// Preprocessed data directory.
    #[arg(long)]
    data: PathBuf,
    /// Model variant: lstm, attn, wtan, or ttan.
    #[arg(long)]
    variant: String,
    #[arg(long, default_value_t = 50)]
    topics: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long)]
    seed: u64,
    /// Output directory for checkpoints and the training log.
    #[arg(long)]
    out: PathBuf,
    /// GloVe text file for embedding initialization.
    #[arg(long)]
    glove: Option<PathBuf>,
    /// Keep the uniform random embedding initialization.
    #[arg(long)]
    no_glove: bool,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.002)]
    init_rate: f64,
    #[arg(long, default_value_t = 200)]
    embed_dim: usize,
    #[arg(long, default_value_t = 450)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 350)]
    attn_dim: usize,
    #[arg(long, default_value_t = 0.6)]
    dropout: f64,
    /// Symmetric Dirichlet concentration (default 1/topics).
    #[arg(long)]
    prior_alpha: Option<f64>,
    /// Worker threads (0 = all available).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Epochs between periodic checkpoints (0 = final only).
    #[arg(long, default_value_t = 10)]
    checkpoint_every: usize,
    /// Epochs between coherence evaluations for best-checkpoint tracking
    /// (0 = off).
    #[arg(long, default_value_t = 10)]
    eval_every: usize,
    /// Continue training from a checkpoint (restores parameters, optimizer,
    /// RNG state, and epoch counters).
    #[arg(long)]
    resume_from: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Words per topic entering the score.
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Sliding-window width in tokens, or `doc` for whole-document windows.
    #[arg(long, default_value = "10")]
    window: String,
    /// Split(s) supplying the co-occurrence counts: train, test, or both.
    #[arg(long, default_value = "train")]
    reference: String,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Feature source: topic (latent mean) or context (attention output).
    #[arg(long, default_value = "topic")]
    source: String,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Write the TSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TimeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    passes: usize,
    #[arg(long, default_value_t = 5)]
    warmup: usize,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Recipe TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Skip stages whose recorded outputs are intact.
    #[arg(long)]
    resume: bool,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Preprocess(args) => {
            let dataset = Dataset::parse(&args.dataset)
                .with_context(|| format!("unknown dataset `{}`", args.dataset))?;
            let mut cfg = dataset.default_preprocess(args.seed);
            if let Some(v) = args.tr_size {
                cfg.tr_size = v;
            }
            if let Some(v) = args.num_below {
                cfg.num_below = v;
            }
            if let Some(v) = args.fr_abv {
                cfg.fr_abv = v;
            }
            if let Some(v) = args.max_vocab {
                cfg.max_vocab = Some(v);
            }
            let summary = cmd_preprocess(dataset, &args.input, &args.out, &cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Train(args) => {
            let variant = Variant::parse(&args.variant)
                .with_context(|| format!("unknown variant `{}`", args.variant))?;
            let glove = if args.no_glove { None } else { args.glove.clone() };
            let resolved = TrainArgsResolved {
                variant,
                topics: args.topics,
                embed_dim: args.embed_dim,
                hidden_dim: args.hidden_dim,
                attn_dim: args.attn_dim,
                dropout_rate: args.dropout,
                prior_alpha: args.prior_alpha,
                train: TrainConfig {
                    batch_size: args.batch_size,
                    epochs: args.epochs,
                    init_rate: args.init_rate,
                    seed: args.seed,
                    threads: effective_threads(args.threads),
                    checkpoint_every: args.checkpoint_every,
                    ..TrainConfig::default()
                },
                glove,
                eval_every: args.eval_every,
                resume_from: args.resume_from.clone(),
            };
            let summary = cmd_train(&args.data, &args.out, &resolved)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::EvalCoherence(args) => {
            let window = parse_window(&args.window)?;
            let reference = ReferenceSplit::parse(&args.reference)
                .with_context(|| format!("unknown reference split `{}`", args.reference))?;
            let json = cmd_eval_coherence(
                &args.checkpoint,
                &args.data,
                args.top,
                window,
                reference,
                args.out.as_deref(),
            )?;
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
        Command::Classify(args) => {
            let source = FeatureSource::parse(&args.source)
                .with_context(|| format!("unknown feature source `{}`", args.source))?;
            let json = cmd_classify(
                &args.checkpoint,
                &args.data,
                &ClassifyArgsResolved {
                    source,
                    lr: args.lr,
                    epochs: args.epochs,
                    seed: args.seed,
                    threads: effective_threads(args.threads),
                },
                args.out.as_deref(),
            )?;
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
        Command::ExportTopics(args) => {
            let tsv = cmd_export_topics(&args.checkpoint, args.top, args.out.as_deref())?;
            if args.out.is_none() {
                print!("{tsv}");
            }
        }
        Command::Time(args) => {
            let report = cmd_time(
                &args.checkpoint,
                &args.data,
                args.passes,
                args.warmup,
                args.batch_size,
                effective_threads(args.threads),
                args.out.as_deref(),
            )?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Run(args) => {
            let recipe = load_recipe(&args.config)?;
            let summary = run_recipe(&recipe, args.resume)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
    }
    Ok(())
}
