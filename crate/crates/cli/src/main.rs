//! `steer`: contrastive activation-steering pipeline on a synthetic
//! accent/timbre task, plus a standalone audio perturbation tool.

mod artifacts;
mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "steer", version, about = "Activation steering toolkit")]
struct Cli {
    /// TOML config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Top-level seed; every random draw derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Artifact directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads for per-sample parallelism (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Omit wall-clock timestamps from artifacts so reruns are bit-identical.
    #[arg(long, global = true)]
    no_timestamp: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus, triplet files, and the accent classifier.
    GenCorpus(GenCorpusArgs),
    /// Train the toy transformer on the teacher-forcing corpus.
    Train(TrainArgs),
    /// Extract per-layer steering vectors from contrastive generations.
    Extract(ExtractArgs),
    /// Decode the eval set with a single steering condition.
    Steer(SteerArgs),
    /// Evaluate a (layer, alpha) grid plus the unsteered baseline.
    Sweep(SweepArgs),
    /// Evaluate the unsteered baseline and the configured steer condition.
    Evaluate,
    /// Merge sweep outputs into the final report (baseline row first).
    Report(ReportArgs),
    /// Apply the gated speaker perturbation to a directory of WAV files.
    AugmentAudio(AugmentAudioArgs),
}

#[derive(Args)]
struct GenCorpusArgs {
    /// Sentence pool size before the eval split.
    #[arg(long)]
    n_sentences: Option<usize>,
    /// Teacher-forcing examples.
    #[arg(long)]
    n_train: Option<usize>,
    /// Extraction triplets (both conditions together).
    #[arg(long)]
    n_extract: Option<usize>,
    /// Held-out eval triplets (both conditions together).
    #[arg(long)]
    n_eval: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// Optimizer steps (ignored with --until-gate).
    #[arg(long)]
    steps: Option<usize>,
    /// Train in chunks until unsteered generations pass the quality gate.
    #[arg(long)]
    until_gate: bool,
    /// Continue from the existing checkpoint.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct ExtractArgs {
    /// Total samples (split evenly between conditions).
    #[arg(long)]
    n_samples: Option<usize>,
    /// "all" or comma-separated layer indices.
    #[arg(long)]
    layers: Option<String>,
    /// Perturb reference sequences during extraction.
    #[arg(long, conflicts_with = "no_augment")]
    augment: bool,
    #[arg(long)]
    no_augment: bool,
}

#[derive(Args)]
struct SteerArgs {
    #[arg(long)]
    layer: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// subtract (neutralize) or add (accentuate).
    #[arg(long)]
    direction: Option<String>,
    /// Decode without any steering hook.
    #[arg(long)]
    unsteered: bool,
    /// Cap the number of eval samples.
    #[arg(long)]
    n: Option<usize>,
    /// Eval condition to decode: accented or neutral prompts.
    #[arg(long, default_value = "accented")]
    condition: String,
    /// Also dump activation traces of the hooked layer.
    #[arg(long)]
    dump_trace: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    layers: Option<String>,
    /// Comma-separated steering strengths.
    #[arg(long)]
    alphas: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep CSVs to merge; defaults to the out-dir sweep.csv.
    #[arg(long)]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct AugmentAudioArgs {
    #[arg(long = "in")]
    input_dir: PathBuf,
    #[arg(long = "out")]
    output_dir: PathBuf,
}

/// Domain failures exit 1; usage errors (clap or validation) exit 2.
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::fmt::Debug for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .ok();
    }
    let file = match RunConfig::load(cli.config.as_deref()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let run = RunConfig::resolve(file, cli.seed, cli.out_dir.clone(), cli.no_timestamp);

    let result = match &cli.command {
        Command::GenCorpus(args) => commands::gen_corpus::run(&run, args.n_sentences, args.n_train, args.n_extract, args.n_eval),
        Command::Train(args) => commands::train::run(&run, args.steps, args.until_gate, args.resume),
        Command::Extract(args) => {
            let augment = if args.no_augment {
                Some(false)
            } else if args.augment {
                Some(true)
            } else {
                None
            };
            commands::extract::run(&run, args.n_samples, args.layers.as_deref(), augment)
        }
        Command::Steer(args) => commands::steer_cmd::run(
            &run,
            args.layer,
            args.alpha,
            args.direction.as_deref(),
            args.unsteered,
            args.n,
            &args.condition,
            args.dump_trace,
        ),
        Command::Sweep(args) => commands::sweep::run(&run, args.layers.as_deref(), args.alphas.as_deref()),
        Command::Evaluate => commands::evaluate::run(&run),
        Command::Report(args) => commands::report::run(&run, &args.inputs),
        Command::AugmentAudio(args) => commands::augment_audio::run(&run, &args.input_dir, &args.output_dir),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
