//! `drivable`: command-line front end for drivable-area post-processing.

mod commands;
mod endpoints;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "drivable", version, about = "Drivable-area extraction, evaluation and benchmarking")]
pub struct Cli {
    /// Pipeline configuration (JSON). Missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the JSON output; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Extract regions from one PGM mask.
    Process {
        #[arg(long)]
        mask: PathBuf,
        /// Overrides the road class stored in the mask file.
        #[arg(long)]
        road_class: Option<String>,
        /// Also render a PPM overlay to this path.
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        frame_id: u32,
    },
    /// Run the frame pipeline from a source into a sink.
    Run {
        /// `dir:<path>`, `gen:<count=N,seed=S,size=WxH>` or `tcp:<addr>` (listen for one client).
        #[arg(long)]
        source: String,
        /// `dir:<path>`, `tcp:<addr>` or `null`.
        #[arg(long, default_value = "null")]
        sink: String,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        queue: Option<usize>,
        /// Also write the pipeline statistics to this path.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Send masks to a processing server at this address instead of
        /// extracting in-process.
        #[arg(long)]
        remote: Option<String>,
    },
    /// Score predictions against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_enum, default_value_t = EvalMode::Masks)]
        mode: EvalMode,
    },
    /// Write synthetic masks with their ground truth.
    Gen {
        #[arg(long, default_value_t = 10)]
        count: u32,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "640x480")]
        size: String,
        /// Render this scene description (JSON) instead of random scenes.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Check the analytic loss gradients against finite differences.
    LossCheck {
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        #[arg(long, default_value_t = drivable_core::gradcheck::DEFAULT_STEP)]
        step: f64,
        #[arg(long, default_value_t = drivable_core::gradcheck::DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
    /// Time the pipeline on synthetic masks after a warm-up run.
    Bench {
        #[arg(long, default_value_t = 100)]
        frames: u32,
        #[arg(long, default_value_t = 10)]
        warmup: u32,
        #[arg(long, default_value = "640x480")]
        size: String,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        queue: Option<usize>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    /// Pixel metrics between two directories of PGM masks.
    Masks,
    /// Region documents (`NNNNNN.json`) against scene ground truth (`NNNNNN.oracle.json`).
    Regions,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
