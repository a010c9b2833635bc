//! `neurotopo`: SWC morphologies to persistence diagrams and images, plus
//! training and evaluation of the tree/image dual encoder.
//!
//! Exit codes: 0 success, 1 data error, 2 config error, 3 numeric failure.

mod cmd;
mod config;
mod data;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{AugmentArgs, EvalArgs, ImageArgs, RunConfig, TrainArgs};
use crate::error::{config, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "neurotopo",
    version,
    about = "Topological persistence images and tree/image contrastive learning for neuron morphologies"
)]
struct Cli {
    /// JSON run configuration; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every stochastic component
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, env = "NEUROTOPO_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct OutArg {
    /// Output directory
    #[arg(long, short, env = "NEUROTOPO_OUT_DIR")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Persistence diagram CSV for each SWC file
    Persistence {
        /// SWC file or directory of SWC files
        input: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// PNG and RAW persistence images for each diagram CSV
    Image {
        /// Diagram CSV file or directory of CSV files
        input: PathBuf,
        #[command(flatten)]
        out: OutArg,
        /// Frozen bounds JSON shared by every image. Without it, shared bounds
        /// are fit over all inputs and written to bounds.json
        #[arg(long, conflicts_with = "per_image_bounds")]
        bounds: Option<PathBuf>,
        /// Fit bounds to each diagram separately
        #[arg(long)]
        per_image_bounds: bool,
        #[command(flatten)]
        image: ImageArgs,
    },
    /// Augmented views of one diagram, with the drawn parameters
    AugmentPreview {
        /// Diagram CSV file
        input: PathBuf,
        #[command(flatten)]
        out: OutArg,
        /// Number of views
        #[arg(long, default_value_t = 4)]
        views: u64,
        /// Also render each view as PNG
        #[arg(long)]
        png: bool,
        #[command(flatten)]
        augment: AugmentArgs,
        #[command(flatten)]
        image: ImageArgs,
    },
    /// Train the dual encoder on a directory of SWC files
    Train {
        /// Directory of SWC files, optionally with labels.csv
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        out: OutArg,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        image: ImageArgs,
        /// Held-out fraction per class excluded from training when labels exist
        #[arg(long)]
        test_fraction: Option<f64>,
    },
    /// kNN, retrieval and complementarity reports for a trained checkpoint
    Eval {
        /// Checkpoint written by `train`
        #[arg(long)]
        checkpoint: PathBuf,
        /// Directory of SWC files with labels.csv
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        out: OutArg,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Seeded synthetic SWC dataset with labels.csv
    Synth {
        #[command(flatten)]
        out: OutArg,
        #[arg(long)]
        n_per_class: Option<usize>,
        /// Number of classes, 2 to 5
        #[arg(long)]
        classes: Option<usize>,
    },
    /// Morphometric feature table for each SWC file
    Morphometrics {
        /// SWC file or directory of SWC files
        input: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(config)?;
    }
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Persistence { input, out } => cmd::persistence::run(&input, &out.out),
        Command::Image { input, out, bounds, per_image_bounds, image } => {
            image.apply(&mut cfg.image);
            cmd::image::run(&input, &out.out, bounds.as_deref(), per_image_bounds, &cfg.finalize()?)
        }
        Command::AugmentPreview { input, out, views, png, augment, image } => {
            augment.apply(&mut cfg.train.augment);
            image.apply(&mut cfg.image);
            cmd::augment::run(&input, &out.out, views, png, &cfg.finalize()?)
        }
        Command::Train { data, out, train, image, test_fraction } => {
            train.apply(&mut cfg);
            image.apply(&mut cfg.image);
            if let Some(f) = test_fraction {
                cfg.eval.test_fraction = f;
            }
            cmd::train::run(&data, &out.out, &cfg.finalize()?)
        }
        Command::Eval { checkpoint, data, out, eval } => {
            eval.apply(&mut cfg.eval);
            cmd::eval::run(&checkpoint, &data, &out.out, &cfg.finalize()?)
        }
        Command::Synth { out, n_per_class, classes } => {
            if let Some(n) = n_per_class {
                cfg.synth.n_per_class = n;
            }
            if let Some(c) = classes {
                cfg.synth.classes = c;
            }
            cmd::synth::run(&out.out, &cfg.finalize()?)
        }
        Command::Morphometrics { input, out } => cmd::morphometrics::run(&input, &out.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
