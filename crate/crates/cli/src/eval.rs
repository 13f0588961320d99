//! `softfx eval-contrast` and `softfx eval-vlm`: no-reference evaluation of
//! (input, output) restoration pairs, reported as JSON Lines with a final
//! aggregate record.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Args;
use serde::Serialize;
use softfx_core::metrics::{residual_contrast_gain, DEFAULT_THRESHOLD, DEFAULT_WINDOW};
use softfx_core::vlm::{judge, JudgeRequest};

use crate::pool::run_parallel;
use crate::util::{self, ReportSink};

#[derive(Args, Debug)]
pub struct EvalContrastArgs {
    /// Directory holding `{stem}{input-suffix}.png` / `{stem}{output-suffix}.png` pairs.
    #[arg(long)]
    pub inputs: PathBuf,
    /// Report file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Local-contrast window size (odd, >= 3).
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub k: usize,
    /// Edit threshold on |input - output| in [0, 1] intensity.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Suffix naming the degraded half of each pair.
    #[arg(long, default_value = "_input")]
    pub input_suffix: String,
    /// Suffix naming the restored half of each pair.
    #[arg(long, default_value = "_output")]
    pub output_suffix: String,
}

#[derive(Serialize)]
struct ContrastLine<'a> {
    stem: &'a str,
    residual_gain: f64,
    global_gain: f64,
    edited_fraction: f64,
    empty_mask: bool,
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    stem: &'a str,
    error: &'a str,
}

#[derive(Serialize)]
struct ContrastAggregate {
    aggregate: bool,
    pairs: usize,
    evaluated: usize,
    mean_residual_gain: f64,
    mean_global_gain: f64,
}

pub fn run_contrast(args: EvalContrastArgs) -> anyhow::Result<ExitCode> {
    let (pairs, unmatched) =
        util::match_pairs(&args.inputs, &args.input_suffix, &args.output_suffix)?;
    for name in &unmatched {
        log::warn!("skipping unpaired file {name}");
    }
    anyhow::ensure!(
        !pairs.is_empty(),
        "no pairs found in {}",
        args.inputs.display()
    );

    let workers = args.workers.unwrap_or_else(crate::config::default_workers);
    let results: Vec<_> = {
        let slots: Vec<std::sync::Mutex<Option<softfx_core::metrics::ContrastReport>>> =
            pairs.iter().map(|_| std::sync::Mutex::new(None)).collect();
        let errors = run_parallel(&pairs, workers, |i, pair| {
            let input = util::load_rgb(&pair.a)?;
            let output = util::load_rgb(&pair.b)?;
            if !input.same_dims(&output) {
                log::warn!(
                    "pair '{}': resampling output {}x{} to input {}x{}",
                    pair.stem,
                    output.width(),
                    output.height(),
                    input.width(),
                    input.height()
                );
            }
            let report = residual_contrast_gain(&input, &output, args.k, args.threshold)
                .map_err(|e| e.to_string())?;
            *slots[i].lock().unwrap() = Some(report);
            Ok(())
        });
        slots
            .into_iter()
            .zip(errors)
            .map(|(slot, err)| match err {
                Some(e) => Err(e),
                None => Ok(slot.into_inner().unwrap().expect("report for clean slot")),
            })
            .collect()
    };

    let mut sink = ReportSink::create(args.out.as_deref())?;
    let mut evaluated = 0usize;
    let mut sum_residual = 0.0;
    let mut sum_global = 0.0;
    for (pair, result) in pairs.iter().zip(&results) {
        match result {
            Ok(report) => {
                evaluated += 1;
                sum_residual += report.residual_gain;
                sum_global += report.global_gain;
                sink.line(&ContrastLine {
                    stem: &pair.stem,
                    residual_gain: report.residual_gain,
                    global_gain: report.global_gain,
                    edited_fraction: report.edited_fraction,
                    empty_mask: report.empty_mask,
                })?;
            }
            Err(error) => sink.line(&ErrorLine {
                stem: &pair.stem,
                error,
            })?,
        }
    }
    sink.line(&ContrastAggregate {
        aggregate: true,
        pairs: pairs.len(),
        evaluated,
        mean_residual_gain: if evaluated > 0 {
            sum_residual / evaluated as f64
        } else {
            0.0
        },
        mean_global_gain: if evaluated > 0 {
            sum_global / evaluated as f64
        } else {
            0.0
        },
    })?;
    Ok(if evaluated > 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

#[derive(Args, Debug)]
pub struct EvalVlmArgs {
    /// Directory holding `{stem}{input-suffix}.png` / `{stem}{output-suffix}.png` pairs.
    #[arg(long)]
    pub inputs: PathBuf,
    /// Artifact named in the judging prompt, e.g. "haze" or "lens flare".
    #[arg(long)]
    pub artifact: String,
    /// Report file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Suffix naming the degraded half of each pair.
    #[arg(long, default_value = "_input")]
    pub input_suffix: String,
    /// Suffix naming the restored half of each pair.
    #[arg(long, default_value = "_output")]
    pub output_suffix: String,
}

#[derive(Serialize)]
struct VlmLine<'a> {
    stem: &'a str,
    score_percent: f64,
    attempts: u32,
}

#[derive(Serialize)]
struct VlmAggregate {
    aggregate: bool,
    pairs: usize,
    succeeded: usize,
    mean_score_percent: f64,
}

pub fn run_vlm(args: EvalVlmArgs) -> anyhow::Result<ExitCode> {
    let request = JudgeRequest::from_env()
        .context("judge endpoint (set VLM_API_BASE, VLM_MODEL, and optionally VLM_API_KEY)")?
        .with_artifact(args.artifact);
    let (pairs, unmatched) =
        util::match_pairs(&args.inputs, &args.input_suffix, &args.output_suffix)?;
    for name in &unmatched {
        log::warn!("skipping unpaired file {name}");
    }
    anyhow::ensure!(
        !pairs.is_empty(),
        "no pairs found in {}",
        args.inputs.display()
    );

    // Sequential on purpose: scores arrive in stem order and the endpoint
    // sees at most one in-flight request with its retries intact.
    let mut sink = ReportSink::create(args.out.as_deref())?;
    let mut succeeded = 0usize;
    let mut sum = 0.0;
    for pair in &pairs {
        let outcome = util::load_rgb(&pair.a)
            .and_then(|original| util::load_rgb(&pair.b).map(|pred| (original, pred)))
            .and_then(|(original, pred)| {
                judge(&request, &original, &pred).map_err(|e| e.to_string())
            });
        match outcome {
            Ok(score) => {
                succeeded += 1;
                sum += score.score_percent;
                sink.line(&VlmLine {
                    stem: &pair.stem,
                    score_percent: score.score_percent,
                    attempts: score.attempts,
                })?;
            }
            Err(error) => {
                log::warn!("pair '{}' failed: {error}", pair.stem);
                sink.line(&ErrorLine {
                    stem: &pair.stem,
                    error: &error,
                })?;
            }
        }
    }
    sink.line(&VlmAggregate {
        aggregate: true,
        pairs: pairs.len(),
        succeeded,
        mean_score_percent: if succeeded > 0 {
            sum / succeeded as f64
        } else {
            0.0
        },
    })?;
    Ok(if succeeded > 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
