//! `softfx occlude`: stamp opaque or near-opaque fills over clean images,
//! producing hard-occlusion training pairs (mask included, since the
//! content underneath is unrecoverable).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;
use softfx_core::raster::io as raster_io;
use softfx_core::seed;
use softfx_core::supervision::{synth_occlusion, MaskSpec};

use crate::config::BatchConfig;
use crate::pool::{run_parallel, BatchReport};
use crate::util;

#[derive(Args, Debug)]
pub struct OccludeArgs {
    /// Directory of clean PNG images.
    #[arg(long)]
    pub inputs: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// JSON batch config supplying mask parameters, seed, workers.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Occlusions per input image.
    #[arg(long, default_value_t = 1)]
    pub count: u32,
    /// Global seed; every output is a pure function of (seed, file name, rep).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism). Never changes outputs.
    #[arg(long)]
    pub workers: Option<usize>,
}

struct Job {
    out: PathBuf,
    mask_spec: MaskSpec,
    global_seed: u64,
}

struct WorkItem {
    rel: String,
    stem: String,
    path: PathBuf,
    rep: u32,
}

#[derive(Serialize)]
struct OcclusionMetadata<'a> {
    tool: &'static str,
    version: &'static str,
    input: &'a str,
    rep: u32,
    global_seed: u64,
    item_seed: u64,
    opacity: f64,
    fill: softfx_core::supervision::OcclusionFill,
    fill_color: [f64; 3],
    mask_spec: &'a MaskSpec,
}

fn run_item(job: &Job, item: &WorkItem) -> Result<(), String> {
    let item_seed = seed::item_seed(job.global_seed, &item.rel, item.rep);
    let clean = util::load_rgb(&item.path)?;
    let sample = synth_occlusion(&clean, &job.mask_spec, item_seed).map_err(|e| e.to_string())?;

    let save = |name: String, img| -> Result<(), String> {
        let path = job.out.join(name);
        raster_io::save_png(&path, img).map_err(|e| format!("{}: {e}", path.display()))
    };
    save(
        format!("{}.o{:02}.png", item.stem, item.rep),
        &sample.degraded,
    )?;
    save(
        format!("{}.o{:02}.mask.png", item.stem, item.rep),
        &sample.mask,
    )?;
    if item.rep == 0 {
        save(format!("{}.clean.png", item.stem), &clean)?;
    }
    util::write_json(
        &job.out.join(format!("{}.o{:02}.json", item.stem, item.rep)),
        &OcclusionMetadata {
            tool: "softfx",
            version: env!("CARGO_PKG_VERSION"),
            input: &item.rel,
            rep: item.rep,
            global_seed: job.global_seed,
            item_seed,
            opacity: sample.opacity,
            fill: sample.fill,
            fill_color: sample.fill_color,
            mask_spec: &job.mask_spec,
        },
    )
}

pub fn run(args: OccludeArgs) -> anyhow::Result<ExitCode> {
    let start = Instant::now();
    if args.count < 1 {
        bail!("--count must be >= 1");
    }
    let config = match &args.config {
        Some(path) => BatchConfig::load(path)?,
        None => BatchConfig::default(),
    };
    let job = Job {
        out: args.out,
        mask_spec: config.supervision.mask.clone(),
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

    let files = util::list_pngs(&args.inputs)?;
    if files.is_empty() {
        bail!("no PNG inputs in {}", args.inputs.display());
    }
    let mut items = Vec::with_capacity(files.len() * args.count as usize);
    for (stem, name, path) in files {
        for rep in 0..args.count {
            items.push(WorkItem {
                rel: name.clone(),
                stem: stem.clone(),
                path: path.clone(),
                rep,
            });
        }
    }
    let names: Vec<String> = items
        .iter()
        .map(|i| format!("{}#o{:02}", i.rel, i.rep))
        .collect();
    let errors = run_parallel(&items, workers, |_, item| run_item(&job, item));
    let report = BatchReport::collect(&names, errors, start.elapsed().as_millis());
    report.print();
    Ok(if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
