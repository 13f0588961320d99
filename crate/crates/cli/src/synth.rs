//! `softfx synth`: render atmospheric degradations over a directory of
//! clean images, one or more seeded variants per input.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;
use softfx_core::atmosphere::{render, AtmosphereParams, RenderPreset};
use softfx_core::procedural::{generate_density, DensityParams};
use softfx_core::raster::io as raster_io;
use softfx_core::{seed, ColorTag, Raster};

use crate::config::{BatchConfig, DensityConfig, PresetSpec};
use crate::pool::{run_parallel, BatchReport};
use crate::util;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// JSON batch config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory of clean PNG images.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    /// Directory of depth maps (default: the input directory).
    #[arg(long)]
    pub depths: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Built-in preset: haze, fog, or smoke.
    #[arg(long)]
    pub preset: Option<String>,
    /// Renders per input image.
    #[arg(long)]
    pub count: Option<u32>,
    /// Global seed; every output is a pure function of (seed, file name, rep).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism). Never changes outputs.
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Fully resolved synth batch.
struct Job {
    input_dir: PathBuf,
    depth_dir: PathBuf,
    output_dir: PathBuf,
    preset: RenderPreset,
    density: DensityConfig,
    count: u32,
    global_seed: u64,
    workers: usize,
    depth_suffix: String,
    dump_density: bool,
}

fn resolve(args: SynthArgs) -> anyhow::Result<Job> {
    let mut config = match &args.config {
        Some(path) => BatchConfig::load(path)?,
        None => BatchConfig::default(),
    };
    if let Some(preset) = args.preset {
        config.preset = Some(PresetSpec::Name(preset));
    }
    if let Some(count) = args.count {
        config.count_per_image = count;
    }
    if let Some(seed) = args.seed {
        config.global_seed = seed;
    }
    if let Some(workers) = args.workers {
        config.workers = Some(workers);
    }
    if let Some(inputs) = args.inputs {
        config.input_dir = Some(inputs);
    }
    if let Some(depths) = args.depths {
        config.depth_dir = Some(depths);
    }
    if let Some(out) = args.out {
        config.output_dir = Some(out);
    }
    config.validate()?;

    let Some(input_dir) = config.input_dir else {
        bail!("no input directory (use --inputs or input_dir in the config)");
    };
    let Some(output_dir) = config.output_dir else {
        bail!("no output directory (use --out or output_dir in the config)");
    };
    let Some(preset_spec) = config.preset else {
        bail!("no preset (use --preset or preset in the config)");
    };
    Ok(Job {
        depth_dir: config.depth_dir.unwrap_or_else(|| input_dir.clone()),
        input_dir,
        output_dir,
        preset: preset_spec.resolve()?,
        density: config.density,
        count: config.count_per_image,
        global_seed: config.global_seed,
        workers: config
            .workers
            .unwrap_or_else(crate::config::default_workers),
        depth_suffix: config.depth_suffix,
        dump_density: config.dump_density,
    })
}

/// One render: input image × repetition index.
struct WorkItem {
    rel: String,
    stem: String,
    path: PathBuf,
    rep: u32,
}

#[derive(Serialize)]
struct DensityMetadata<'a> {
    seed: u64,
    params: &'a DensityParams,
}

/// Sidecar recording everything needed to regenerate the render bit-exactly
/// from the inputs. Deliberately free of wall-clock state.
#[derive(Serialize)]
struct SynthMetadata<'a> {
    tool: &'static str,
    version: &'static str,
    input: &'a str,
    depth: String,
    rep: u32,
    global_seed: u64,
    item_seed: u64,
    preset: &'static str,
    params: &'a AtmosphereParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    density: Option<DensityMetadata<'a>>,
}

fn run_item(job: &Job, item: &WorkItem) -> Result<(), String> {
    let item_seed = seed::item_seed(job.global_seed, &item.rel, item.rep);
    let clean = util::load_rgb(&item.path)?;

    let depth_path =
        util::find_depth(&job.depth_dir, &item.stem, &job.depth_suffix).ok_or_else(|| {
            format!(
                "no depth map for '{}' (looked for {}{}.png/.pfm in {})",
                item.rel,
                item.stem,
                job.depth_suffix,
                job.depth_dir.display()
            )
        })?;
    let depth = raster_io::load_depth(&depth_path).map_err(|e| e.to_string())?;
    if depth.width() != clean.width() || depth.height() != clean.height() {
        log::warn!(
            "resampling depth {} from {}x{} to image size {}x{}",
            depth_path.display(),
            depth.width(),
            depth.height(),
            clean.width(),
            clean.height()
        );
    }
    let depth = util::depth_to_dims(depth, clean.width(), clean.height())?;

    let params = job.preset.draw_params(item_seed);
    let density = match &job.density {
        DensityConfig::Homogeneous => None,
        DensityConfig::Procedural { params } => {
            let field = generate_density(
                clean.width(),
                clean.height(),
                params,
                seed::derive(item_seed, 1),
            )
            .map_err(|e| e.to_string())?;
            Some(field)
        }
    };

    let degraded = render(&clean, &depth, &params, density.as_ref()).map_err(|e| e.to_string())?;

    let save = |name: String, img: &Raster| -> Result<(), String> {
        let path = job.output_dir.join(name);
        raster_io::save_png(&path, img).map_err(|e| format!("{}: {e}", path.display()))
    };
    save(format!("{}.r{:02}.png", item.stem, item.rep), &degraded)?;
    if item.rep == 0 {
        save(format!("{}.clean.png", item.stem), &clean)?;
    }
    if job.dump_density {
        if let Some(field) = &density {
            // Scale by the configured ceiling so the dump stays in [0, 1].
            let hi = match &job.density {
                DensityConfig::Procedural { params } => params.range[1],
                DensityConfig::Homogeneous => 1.0,
            };
            let vis = Raster::from_vec(
                field.width(),
                field.height(),
                1,
                ColorTag::Gray,
                field.values().iter().map(|v| v / hi).collect(),
            )
            .map_err(|e| e.to_string())?;
            let path = job
                .output_dir
                .join(format!("{}.r{:02}.density.png", item.stem, item.rep));
            raster_io::save_png16(&path, &vis).map_err(|e| format!("{}: {e}", path.display()))?;
        }
    }

    let metadata = SynthMetadata {
        tool: "softfx",
        version: env!("CARGO_PKG_VERSION"),
        input: &item.rel,
        depth: depth_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        rep: item.rep,
        global_seed: job.global_seed,
        item_seed,
        preset: job.preset.kind.name(),
        params: &params,
        density: density.as_ref().map(|_| DensityMetadata {
            seed: seed::derive(item_seed, 1),
            params: match &job.density {
                DensityConfig::Procedural { params } => params,
                DensityConfig::Homogeneous => unreachable!("density implies procedural"),
            },
        }),
    };
    util::write_json(
        &job.output_dir
            .join(format!("{}.r{:02}.json", item.stem, item.rep)),
        &metadata,
    )
}

pub fn run(args: SynthArgs) -> anyhow::Result<ExitCode> {
    let start = Instant::now();
    let job = resolve(args)?;
    std::fs::create_dir_all(&job.output_dir)
        .with_context(|| format!("creating output dir {}", job.output_dir.display()))?;

    let mut files = util::list_pngs(&job.input_dir)?;
    if !job.depth_suffix.is_empty() && job.depth_dir == job.input_dir {
        // Depth maps living beside the images are not themselves inputs.
        files.retain(|(stem, _, _)| !stem.ends_with(&job.depth_suffix));
    }
    if files.is_empty() {
        bail!("no PNG inputs in {}", job.input_dir.display());
    }
    let mut items = Vec::with_capacity(files.len() * job.count as usize);
    for (stem, name, path) in files {
        for rep in 0..job.count {
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
        .map(|i| format!("{}#r{:02}", i.rel, i.rep))
        .collect();

    let errors = run_parallel(&items, job.workers, |_, item| run_item(&job, item));
    let report = BatchReport::collect(&names, errors, start.elapsed().as_millis());
    report.print();
    Ok(if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
