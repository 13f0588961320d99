//! `softfx supervise`: turn (input, gt) pairs into partial-strength
//! training targets with randomized soft masks.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::Args;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use softfx_core::raster::io as raster_io;
use softfx_core::seed;
use softfx_core::supervision::{
    compose_target, draw_strength, soften_mask, synth_mask, Direction, MaskSpec, SupervisionSpec,
};

use crate::config::BatchConfig;
use crate::pool::{run_parallel, BatchReport};
use crate::util::{self, Pair};

#[derive(Args, Debug)]
pub struct SuperviseArgs {
    /// Directory holding `{stem}{input-suffix}.png` / `{stem}{gt-suffix}.png` pairs.
    #[arg(long)]
    pub inputs: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// JSON batch config supplying mask parameters, direction, seed, workers.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Global seed; every target is a pure function of (seed, file name).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism). Never changes outputs.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Suffix naming the degraded half of each pair.
    #[arg(long, default_value = "_input")]
    pub input_suffix: String,
    /// Suffix naming the clean half of each pair.
    #[arg(long, default_value = "_gt")]
    pub gt_suffix: String,
}

struct Job {
    out: PathBuf,
    mask_spec: MaskSpec,
    direction: Direction,
    global_seed: u64,
}

#[derive(Serialize)]
struct TargetMetadata<'a> {
    tool: &'static str,
    version: &'static str,
    input: String,
    gt: String,
    item_seed: u64,
    mask_seed: u64,
    strength_alpha: f64,
    direction: &'static str,
    dilation_radius_px: f64,
    blur_sigma_px: f64,
    /// Blending happens on the encoded samples as loaded from disk.
    blend_space: &'static str,
    mask_spec: &'a MaskSpec,
}

fn in_range(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

fn run_pair(job: &Job, pair: &Pair) -> Result<(), String> {
    let rel = pair
        .a
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let item_seed = seed::item_seed(job.global_seed, &rel, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(item_seed);
    // Fixed draw order: mask seed, dilation, blur, strength.
    let mask_seed = rng.random::<u64>();
    let dilation_frac = in_range(&mut rng, job.mask_spec.dilation_radius);
    let sigma_frac = in_range(&mut rng, job.mask_spec.blur_sigma);
    let alpha = draw_strength(&mut rng);

    let input = util::load_rgb(&pair.a)?;
    let gt = util::load_rgb(&pair.b)?;
    if !input.same_dims(&gt) {
        return Err(format!(
            "pair '{}': input {}x{} vs gt {}x{}",
            pair.stem,
            input.width(),
            input.height(),
            gt.width(),
            gt.height()
        ));
    }

    let short = input.width().min(input.height()) as f64;
    let dilation_px = dilation_frac * short;
    let sigma_px = sigma_frac * short;
    let binary = synth_mask(input.width(), input.height(), &job.mask_spec, mask_seed);
    let soft = soften_mask(&binary, dilation_px, sigma_px).map_err(|e| e.to_string())?;

    let spec = SupervisionSpec {
        strength_alpha: alpha,
        mask: soft,
        direction: job.direction,
    };
    let target = compose_target(&input, &gt, &spec).map_err(|e| e.to_string())?;

    let save = |name: String, img| -> Result<(), String> {
        let path = job.out.join(name);
        raster_io::save_png(&path, img).map_err(|e| format!("{}: {e}", path.display()))
    };
    save(format!("{}.target.png", pair.stem), &target)?;
    save(format!("{}.mask.png", pair.stem), &spec.mask)?;
    util::write_json(
        &job.out.join(format!("{}.json", pair.stem)),
        &TargetMetadata {
            tool: "softfx",
            version: env!("CARGO_PKG_VERSION"),
            input: rel,
            gt: pair
                .b
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            item_seed,
            mask_seed,
            strength_alpha: alpha,
            direction: job.direction.name(),
            dilation_radius_px: dilation_px,
            blur_sigma_px: sigma_px,
            blend_space: "srgb-encoded",
            mask_spec: &job.mask_spec,
        },
    )
}

pub fn run(args: SuperviseArgs) -> anyhow::Result<ExitCode> {
    let start = Instant::now();
    let config = match &args.config {
        Some(path) => BatchConfig::load(path)?,
        None => BatchConfig::default(),
    };
    let job = Job {
        out: args.out,
        mask_spec: config.supervision.mask.clone(),
        direction: config.supervision.direction,
        global_seed: args.seed.unwrap_or(config.global_seed),
    };
    job.mask_spec
        .validate()
        .context("mask parameters in config")?;
    let workers = args
        .workers
        .or(config.workers)
        .unwrap_or_else(crate::config::default_workers);
    std::fs::create_dir_all(&job.out)
        .with_context(|| format!("creating output dir {}", job.out.display()))?;

    let (pairs, unmatched) = util::match_pairs(&args.inputs, &args.input_suffix, &args.gt_suffix)?;
    for name in &unmatched {
        log::warn!("skipping unpaired file {name}");
    }

    let names: Vec<String> = pairs.iter().map(|p| p.stem.clone()).collect();
    let errors = run_parallel(&pairs, workers, |_, pair| run_pair(&job, pair));
    let mut report = BatchReport::collect(&names, errors, start.elapsed().as_millis());
    report.skipped = unmatched;
    report.print();
    Ok(if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
