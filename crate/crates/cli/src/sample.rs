//! `softfx sample`: draw weighted training examples from a dataset
//! manifest and emit them as JSON Lines.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;
use softfx_core::sampler::Sampler;

use crate::util::ReportSink;

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Manifest JSON: tasks -> weighted datasets -> records.
    pub manifest: PathBuf,
    /// Number of draws.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Seed; the draw sequence is a pure function of it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: SampleArgs) -> anyhow::Result<ExitCode> {
    let sampler = Sampler::load(&args.manifest)?;
    let mut sink = ReportSink::create(args.out.as_deref())?;
    for draw in sampler.sample(args.seed, args.count) {
        sink.line(&draw)?;
    }
    Ok(ExitCode::SUCCESS)
}
