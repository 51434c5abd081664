use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;

use plotgrid::classifier::TrainConfig;
use plotgrid::features::EmbeddingKind;
use plotgrid::inference::{InferenceConfig, InferenceMode, TopLScope};
use plotgrid::pipeline::{
    embed_stage, evaluate_stage, infer_stage, make_collage_dataset, preprocess_stage,
    resolve_workers, run_pipeline, submit_stage, train_stage, with_workers, CollageSpec,
    EmbedParams, ExtractorChoice, PipelineConfig, PreprocessParams, StageStatus, WORKERS_ENV,
};

/// Multi-label plot classification from single-species training images.
#[derive(Parser)]
#[command(name = "plotgrid", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Crop, resize and filter labeled images into IMG1 shards plus catalog.csv.
    Preprocess(PreprocessArgs),
    /// Turn preprocessed images (or external EMB1 shards) into embeddings.
    Embed(EmbedArgs),
    /// Fit the linear softmax classifier.
    Train(TrainArgs),
    /// Predict species sets for plot images.
    Infer(InferArgs),
    /// Score predictions against a truth CSV.
    Evaluate(EvaluateArgs),
    /// Write the submission CSV.
    Submit(SubmitArgs),
    /// Generate the synthetic collage benchmark.
    MakeCollage(CollageArgs),
    /// Run the whole pipeline from a TOML config.
    Run(RunArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 128)]
    side: u32,
    #[arg(long, default_value_t = 100)]
    min_count: u64,
    #[arg(long, default_value_t = 512)]
    shard_size: usize,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "cls768")]
    kind: EmbeddingKind,
    #[arg(long, default_value = "toy")]
    extractor: ExtractorChoice,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    /// Plot PNG directory or IMG1 shards.
    #[arg(long)]
    images: PathBuf,
    #[arg(long, default_value = "grid-argmax")]
    mode: InferenceMode,
    #[arg(long, default_value_t = 3)]
    grid: u32,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long, default_value_t = 5)]
    top_l: usize,
    /// Apply top-L per tile, or once to the merged candidate list.
    #[arg(long, value_parser = ["per-tile", "global"], default_value = "per-tile")]
    top_l_scope: String,
    /// Toy extractor seed; must match the one used by `embed`.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct SubmitArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = 5)]
    cap: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CollageArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    species: usize,
    #[arg(long, default_value_t = 50)]
    per_species: usize,
    #[arg(long, default_value_t = 40)]
    plots: usize,
    #[arg(long, default_value_t = 3)]
    grid: u32,
    #[arg(long, default_value_t = 4)]
    species_per_plot: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    if let Command::Run(args) = &cli.command {
        let mut cfg = PipelineConfig::load(&args.config)
            .with_context(|| format!("loading {}", args.config.display()))?;
        if cli.workers.is_some() {
            cfg.workers = cli.workers;
        }
        let outcome = run_pipeline(&cfg)?;
        for (stage, status) in &outcome.stages {
            let word = match status {
                StageStatus::Ran => "ran",
                StageStatus::Skipped => "skipped",
            };
            println!("{stage}: {word}");
        }
        if let Some(m) = &outcome.metrics {
            println!(
                "micro_f1={:.4} macro_f1_per_plot={:.4} macro_f1_per_species={:.4}",
                m.micro_f1, m.macro_f1_per_plot, m.macro_f1_per_species
            );
        }
        return Ok(());
    }

    let workers = resolve_workers(cli.workers)?;
    with_workers(workers, || -> anyhow::Result<()> {
        match cli.command {
            Command::Preprocess(a) => {
                let params = PreprocessParams {
                    side: a.side,
                    min_count: a.min_count,
                    shard_size: a.shard_size,
                };
                let s = preprocess_stage(&a.input, &a.output, &params)?;
                println!(
                    "kept {} of {} images, {} species, {} shards",
                    s.kept, s.loaded, s.species, s.shards
                );
            }
            Command::Embed(a) => {
                let params = EmbedParams {
                    kind: a.kind,
                    extractor: a.extractor,
                    seed: a.seed,
                };
                let s = embed_stage(&a.input, &a.output, &params)?;
                println!("embedded {} records into {} shards", s.records, s.shards);
            }
            Command::Train(a) => {
                let cfg = TrainConfig {
                    learning_rate: a.lr,
                    momentum: a.momentum,
                    batch_size: a.batch,
                    epochs: a.epochs,
                    seed: a.seed,
                    ..TrainConfig::default()
                };
                let s = train_stage(&a.embeddings, &a.catalog, &a.out, &cfg)?;
                println!(
                    "trained on {} records, {} classes: loss {:.4} -> {:.4}, train accuracy {:.4}",
                    s.records, s.classes, s.initial_loss, s.final_loss, s.train_accuracy
                );
            }
            Command::Infer(a) => {
                let cfg = InferenceConfig {
                    mode: a.mode,
                    grid_n: a.grid,
                    top_k: a.top_k,
                    top_l: a.top_l,
                    top_l_scope: if a.top_l_scope == "global" {
                        TopLScope::Global
                    } else {
                        TopLScope::PerTile
                    },
                };
                let n = infer_stage(&a.model, &a.images, &cfg, a.seed, &a.out)?;
                println!("predicted {n} plots");
            }
            Command::Evaluate(a) => {
                let m = evaluate_stage(&a.pred, &a.truth, &a.report)?;
                println!(
                    "micro_f1={:.4} macro_f1_per_plot={:.4} macro_f1_per_species={:.4}",
                    m.micro_f1, m.macro_f1_per_plot, m.macro_f1_per_species
                );
            }
            Command::Submit(a) => {
                let n = submit_stage(&a.pred, a.cap, &a.out)?;
                println!("wrote {n} rows");
            }
            Command::MakeCollage(a) => {
                let spec = CollageSpec {
                    num_species: a.species,
                    images_per_species: a.per_species,
                    plots: a.plots,
                    grid_n: a.grid,
                    species_per_plot: a.species_per_plot,
                    seed: a.seed,
                };
                let paths = make_collage_dataset(&spec, &a.out)?;
                println!(
                    "train: {}\nplots: {}\ntruth: {}",
                    paths.train.display(),
                    paths.plots.display(),
                    paths.truth.display()
                );
            }
            Command::Run(_) => unreachable!("handled above"),
        }
        Ok(())
    })??;
    info!("done");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
