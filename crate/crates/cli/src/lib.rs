//! Command-line surface for the soft-effect synthesis and evaluation
//! toolkit. Everything algorithmic lives in `softfx_core`; this crate adds
//! config handling, directory plumbing, a worker pool, and reports.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub mod config;
pub mod eval;
pub mod occlude;
pub mod pool;
pub mod presets;
pub mod sample;
pub mod supervise;
pub mod synth;
pub mod util;

#[derive(Parser, Debug)]
#[command(
    name = "softfx",
    version,
    about = "Synthesize soft-effect degradations and evaluate their removal"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render haze, fog, or smoke over clean images (needs depth maps).
    Synth(synth::SynthArgs),
    /// Compose partial-strength training targets from (input, gt) pairs.
    Supervise(supervise::SuperviseArgs),
    /// Stamp opaque occluders over clean images.
    Occlude(occlude::OccludeArgs),
    /// Residual contrast gain over (input, output) pairs.
    EvalContrast(eval::EvalContrastArgs),
    /// Score (input, output) pairs with a vision-language judge.
    EvalVlm(eval::EvalVlmArgs),
    /// Draw weighted records from a dataset manifest.
    Sample(sample::SampleArgs),
    /// Print the built-in atmosphere presets.
    Presets(presets::PresetsArgs),
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Synth(args) => synth::run(args),
        Command::Supervise(args) => supervise::run(args),
        Command::Occlude(args) => occlude::run(args),
        Command::EvalContrast(args) => eval::run_contrast(args),
        Command::EvalVlm(args) => eval::run_vlm(args),
        Command::Sample(args) => sample::run(args),
        Command::Presets(args) => presets::run(args),
    }
}
