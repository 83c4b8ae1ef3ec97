use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use neuroqc::dataset::DEFAULT_FOLDS;
use neuroqc::matching::DEFAULT_THRESHOLD;

#[derive(Debug, Parser)]
#[command(name = "neuroqc", version, about = "Point-of-interest quality control for neuron reconstructions")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores)
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// More log output on stderr (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct ThresholdArg {
    /// Match distance in voxels; a point matches when strictly closer
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate SWC files
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Write a JSON summary per file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label points of interest of a wrong reconstruction against the correct one
    Label {
        #[arg(long)]
        wrong: PathBuf,
        #[arg(long)]
        correct: PathBuf,
        /// Output label set JSON
        #[arg(long)]
        out: PathBuf,
        /// Also write the wrong-to-correct match map
        #[arg(long)]
        matches: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        neuron_id: u64,
        #[command(flatten)]
        threshold: ThresholdArg,
    },
    /// Crop POI / match-control patch pairs into an .nqcd file
    Crop {
        /// Corpus manifest; labels every wrong reconstruction it lists
        #[arg(long, conflicts_with_all = ["labels", "wrong", "correct", "volume"])]
        manifest: Option<PathBuf>,
        /// Label set JSON written by `label`
        #[arg(long, requires_all = ["wrong", "correct", "volume"])]
        labels: Option<PathBuf>,
        #[arg(long)]
        wrong: Option<PathBuf>,
        #[arg(long)]
        correct: Option<PathBuf>,
        /// Raw volume (with JSON sidecar) or multi-page TIFF
        #[arg(long)]
        volume: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        neuron_id: u64,
        #[arg(long, default_value_t = 1)]
        wrong_id: u64,
        #[arg(long, default_value_t = 0)]
        correct_id: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        threshold: ThresholdArg,
    },
    /// Sample random control-candidate patches from correct reconstructions
    Pool {
        #[arg(long)]
        manifest: PathBuf,
        /// Number of points to draw
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        threshold: ThresholdArg,
    },
    /// Assign neurons to cross-validation folds
    Split {
        /// Text file with one neuron id per line
        #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
        ids: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_FOLDS)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus with injected tracing errors
    Synth {
        #[arg(long, default_value_t = 40)]
        neurons: usize,
        #[arg(long, default_value_t = 4)]
        per_volume: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON file overriding generator parameters
        #[arg(long)]
        params: Option<PathBuf>,
        /// Skip rendering volumes
        #[arg(long)]
        no_volumes: bool,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        threshold: ThresholdArg,
    },
    /// Summarise a scores CSV per fold
    Eval {
        #[arg(long)]
        scores: PathBuf,
        /// Scores of other correct points, reported as a second specificity
        #[arg(long)]
        other: Option<PathBuf>,
        /// Decision threshold on the score
        #[arg(long, default_value_t = neuroqc::metrics::DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Row name in the text table
        #[arg(long, default_value = "model")]
        name: String,
        /// Report JSON
        #[arg(long)]
        out: Option<PathBuf>,
        /// Aligned text table
        #[arg(long)]
        table: Option<PathBuf>,
    },
}
