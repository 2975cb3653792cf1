//! `hypercs`: compressive sampling, reconstruction, and ACE chemical
//! detection on hyperspectral cube videos.
//!
//! The pipeline runs as five subcommands with files as stage boundaries:
//!
//! ```text
//! synth -> sample -> reconstruct -> detect (per arm) -> compare
//! ```
//!
//! Exit codes: 0 success, 2 bad arguments, 3 file or manifest format
//! errors, 4 dimension mismatches between stages, 5 solver non-convergence
//! under --strict.

mod commands;
mod error;
mod manifest;
mod util;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "hypercs",
    about = "Band-wise compressive sampling, split Bregman reconstruction, and ACE detection \
             for hyperspectral cube videos",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic plume video with ground truth.
    Synth(commands::synth::SynthArgs),
    /// Compressively sample an HSC video into HSM measurements.
    Sample(commands::sample::SampleArgs),
    /// Reconstruct an HSM file back into an HSC video.
    Reconstruct(commands::reconstruct::ReconstructArgs),
    /// Run detection on one pipeline arm and emit counts/histogram CSVs.
    Detect(commands::detect::DetectArgs),
    /// Compare the two arms' count curves (and optional gaps).
    Compare(commands::compare::CompareArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Sample(args) => commands::sample::run(args),
        Command::Reconstruct(args) => commands::reconstruct::run(args),
        Command::Detect(args) => commands::detect::run(args),
        Command::Compare(args) => commands::compare::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
