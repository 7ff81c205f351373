mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "herdtrack", version, about = "Long-term multi-animal mask tracking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one configuration field, e.g. `--set pipeline.scan_stride=5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Track identities through one or more clips.
    Track {
        /// Frames JSON, one per clip.
        #[arg(long)]
        input: Vec<PathBuf>,
        /// Pen JSON with `camera_id`, `polygon` and `frame_size`.
        #[arg(long)]
        pen: Option<PathBuf>,
        /// Detection confidence threshold.
        #[arg(long)]
        threshold: Option<f64>,
        /// Also write the full run report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score predicted tracks against ground truth.
    Evaluate {
        /// Predicted tracks JSON.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Ground-truth tracks JSON.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// IoU needed for a match.
        #[arg(long)]
        threshold: Option<f64>,
        /// Per-frame CSV output.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Detection precision/recall/F1 over a grid of confidence thresholds.
    Sweep {
        /// Frames JSON holding the scored detections.
        #[arg(long)]
        input: Vec<PathBuf>,
        /// Ground-truth tracks JSON.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// IoU needed for a match.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic scenario with ground truth.
    Simulate {
        /// Scenario spec JSON; defaults apply to missing fields.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Skip writing PGM frame images.
        #[arg(long)]
        no_images: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Draw tracked masks over the frames as PPM images.
    Render {
        /// Tracks JSON.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Frames JSON, one per clip.
        #[arg(long)]
        frames: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the quality checks on a tracks file.
    QcReport {
        /// Tracks JSON.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HERDTRACK_LOG", "warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
