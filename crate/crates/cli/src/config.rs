//! Batch configuration: a single JSON document, with command-line flags
//! overriding individual fields.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;
use softfx_core::atmosphere::RenderPreset;
use softfx_core::procedural::DensityParams;
use softfx_core::supervision::{Direction, MaskSpec};

/// On-disk batch configuration. Every field is optional in the JSON;
/// required values are checked after flag merging.
#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchConfig {
    pub input_dir: Option<PathBuf>,
    /// Defaults to `input_dir`: depth maps living next to their images.
    pub depth_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub preset: Option<PresetSpec>,
    pub density: DensityConfig,
    pub count_per_image: u32,
    pub global_seed: u64,
    /// Defaults to the machine's available parallelism.
    pub workers: Option<usize>,
    pub supervision: SupervisionConfig,
    /// Inserted between the image stem and the depth extension, e.g.
    /// `"_depth"` pairs `img.png` with `img_depth.png`.
    pub depth_suffix: String,
    /// Also write the generated density field next to each render.
    pub dump_density: bool,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            input_dir: None,
            depth_dir: None,
            output_dir: None,
            preset: None,
            density: DensityConfig::default(),
            count_per_image: 1,
            global_seed: 0,
            workers: None,
            supervision: SupervisionConfig::default(),
            depth_suffix: String::new(),
            dump_density: false,
        }
    }
}

impl BatchConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: BatchConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.count_per_image < 1 {
            bail!("count_per_image must be >= 1");
        }
        if self.workers == Some(0) {
            bail!("workers must be >= 1");
        }
        Ok(())
    }
}

/// Either the name of a built-in preset or a full inline parameter set.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PresetSpec {
    Name(String),
    Inline(Box<RenderPreset>),
}

impl PresetSpec {
    pub fn resolve(&self) -> anyhow::Result<RenderPreset> {
        match self {
            PresetSpec::Name(name) => RenderPreset::by_name(name)
                .with_context(|| format!("unknown preset '{name}' (try: haze, fog, smoke)")),
            PresetSpec::Inline(preset) => Ok((**preset).clone()),
        }
    }
}

/// Medium density: uniform, or a procedural field regenerated per render.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum DensityConfig {
    Homogeneous,
    Procedural {
        #[serde(flatten)]
        params: DensityParams,
    },
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig::Procedural {
            params: DensityParams::default(),
        }
    }
}

/// Mask-sampling parameters and blend direction for supervision targets.
#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupervisionConfig {
    pub mask: MaskSpec,
    pub direction: Direction,
}

impl Default for SupervisionConfig {
    fn default() -> Self {
        SupervisionConfig {
            mask: MaskSpec::default(),
            direction: Direction::Remove,
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(std::num::NonZeroUsize::get)
        .unwrap_or(1)
}
