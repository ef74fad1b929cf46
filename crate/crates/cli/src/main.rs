//! `serpent`: speech emotion recognition and speaker diarization pipeline.

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serpent_cli::commands::{self, PredictOptions};
use serpent_cli::config::{Overrides, PipelineConfig, CONFIG_ENV};

#[derive(Parser)]
#[command(name = "serpent", version, about = "Speech emotion recognition and speaker diarization pipeline")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Pipeline config file (TOML)
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Seed for augmentation, splitting and model initialisation
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Scan the corpora into manifest.csv
    Ingest,
    /// Crop, augment and featurize every manifest clip into features.csv
    Extract,
    /// Train on features.csv and write the checkpoint and reports
    Train {
        /// Keep all variants of a clip on one side of the split
        #[arg(long)]
        split_by_clip: bool,
    },
    /// Re-evaluate a checkpoint on the held-out rows
    Report {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        split_by_clip: bool,
    },
    /// Classify the emotion of a recording, optionally per speaker segment
    Predict {
        wav: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        diarize: bool,
        /// Cluster into exactly this many speakers (implies --diarize)
        #[arg(long)]
        num_speakers: Option<usize>,
        #[arg(long)]
        rttm_out: Option<PathBuf>,
    },
    /// Split a recording into speaker turns and write RTTM
    Diarize {
        wav: PathBuf,
        #[arg(long)]
        num_speakers: Option<usize>,
        /// Cosine distance at which clustering stops merging
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        rttm_out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let g = cli.global;
    let overrides = Overrides { seed: g.seed, epochs: g.epochs, batch_size: g.batch_size, out_dir: g.out_dir };
    let mut cfg = PipelineConfig::resolve(g.config.as_deref(), &overrides)?;
    let out = &mut io::stdout().lock();
    match cli.command {
        Command::Ingest => {
            commands::ingest(&cfg, out)?;
        }
        Command::Extract => {
            commands::extract(&cfg, out)?;
        }
        Command::Train { split_by_clip } => {
            cfg.split.by_clip |= split_by_clip;
            commands::train(&cfg, out)?;
        }
        Command::Report { checkpoint, split_by_clip } => {
            cfg.split.by_clip |= split_by_clip;
            commands::report(&cfg, checkpoint.as_deref(), out)?;
        }
        Command::Predict { wav, checkpoint, diarize, num_speakers, rttm_out } => {
            let opts = PredictOptions { checkpoint, diarize, num_speakers, rttm_out };
            commands::predict(&cfg, &wav, &opts, out)?;
        }
        Command::Diarize { wav, num_speakers, threshold, rttm_out } => {
            if num_speakers.is_some() {
                cfg.diarize.num_speakers = num_speakers;
            }
            if let Some(t) = threshold {
                cfg.diarize.threshold = t;
            }
            cfg.diarize.validate()?;
            commands::diarize_file(&cfg, &wav, rttm_out.as_deref(), out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
