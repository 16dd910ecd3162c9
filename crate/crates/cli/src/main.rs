//! `lanelock`: restore lane markers in a street image from a geotagged
//! image store.
//!
//! Exit codes: 0 success, 2 usage, input, or I/O error, 3 result refused
//! (too few inliers to trust the location) or evaluation assertion failed.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "lanelock", version, about = "Project stored lane markers onto a current street image")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add an image to a store, or report the record count.
    Index(IndexArgs),
    /// Find the stored view that best matches an image.
    Locate(RunArgs),
    /// Locate, align, and draw the stored lane markers onto an image.
    Overlay(RunArgs),
    /// Difference image and mean squared difference of two aligned images.
    Diff(DiffArgs),
    /// Run the evaluation cases in a fixture directory.
    Eval(EvalArgs),
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    store: PathBuf,
    /// PNG file to add.
    #[arg(long, requires_all = ["id", "pose"])]
    image: Option<PathBuf>,
    #[arg(long)]
    id: Option<String>,
    /// lat,lon,heading,pitch
    #[arg(long, allow_hyphen_values = true)]
    pose: Option<String>,
    /// ISO-8601 capture date.
    #[arg(long, default_value = "")]
    captured: String,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the RANSAC seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the worker thread count (0 = automatic).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Current image (PNG or JPEG).
    image: PathBuf,
    #[arg(long)]
    store: PathBuf,
    /// Initial pose estimate: lat,lon,heading,pitch
    #[arg(long, allow_hyphen_values = true)]
    pose: String,
    /// Directory of pose-named PNGs used to fetch views missing from the store.
    #[arg(long, conflicts_with = "provider_url")]
    provider_dir: Option<PathBuf>,
    /// URL template for an HTTP imagery provider.
    #[arg(long)]
    provider_url: Option<String>,
    /// Output path: JSON report for `locate`, overlay PNG for `overlay`
    /// (its report goes next to it with a `.json` extension).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the difference image here (`overlay` only).
    #[arg(long)]
    diff: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct DiffArgs {
    projected: PathBuf,
    current: PathBuf,
    /// Validity mask PNG; nonzero pixels are valid. Defaults to all pixels.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    fixture_dir: PathBuf,
    #[command(flatten)]
    common: Common,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Index(a) => commands::index(&a),
        Command::Locate(a) => commands::locate(&a),
        Command::Overlay(a) => commands::overlay(&a),
        Command::Diff(a) => commands::diff(&a),
        Command::Eval(a) => commands::eval(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
