//! Directory scanning, filename pairing, and small image plumbing shared
//! by the subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use softfx_core::raster::io as raster_io;
use softfx_core::{ColorTag, DepthMap, Raster};

/// PNG files in `dir` as `(stem, file_name, path)`, sorted by file name so
/// batch composition never depends on directory iteration order.
pub fn list_pngs(dir: &Path) -> anyhow::Result<Vec<(String, String, PathBuf)>> {
    let mut out = Vec::new();
    let entries =
        fs::read_dir(dir).with_context(|| format!("listing input dir {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if !is_png {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_string);
        let name = path
            .file_name()
            .and_then(|s| s.to_str())
            .map(str::to_string);
        if let (Some(stem), Some(name)) = (stem, name) {
            out.push((stem, name, path));
        }
    }
    out.sort_by(|a, b| a.1.cmp(&b.1));
    Ok(out)
}

/// One matched (role A, role B) file pair.
#[derive(Clone, Debug)]
pub struct Pair {
    pub stem: String,
    pub a: PathBuf,
    pub b: PathBuf,
}

/// Matches `{stem}{a_suffix}.png` with `{stem}{b_suffix}.png` in one
/// directory. Returns the pairs (sorted by stem) plus the file names that
/// matched neither role or lacked a partner.
pub fn match_pairs(
    dir: &Path,
    a_suffix: &str,
    b_suffix: &str,
) -> anyhow::Result<(Vec<Pair>, Vec<String>)> {
    let files = list_pngs(dir)?;
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for (file_stem, name, path) in &files {
        // Role-B files are claimed by their A-side partner below.
        if !b_suffix.is_empty() && file_stem.ends_with(b_suffix) {
            let stem = &file_stem[..file_stem.len() - b_suffix.len()];
            let partner = dir.join(format!("{stem}{a_suffix}.png"));
            if !partner.is_file() {
                unmatched.push(name.clone());
            }
            continue;
        }
        match file_stem.strip_suffix(a_suffix) {
            Some(stem) => {
                let b = dir.join(format!("{stem}{b_suffix}.png"));
                if b.is_file() {
                    pairs.push(Pair {
                        stem: stem.to_string(),
                        a: path.clone(),
                        b,
                    });
                } else {
                    unmatched.push(name.clone());
                }
            }
            None => unmatched.push(name.clone()),
        }
    }
    pairs.sort_by(|x, y| x.stem.cmp(&y.stem));
    Ok((pairs, unmatched))
}

/// Loads an encoded image, widening grayscale to RGB so the rendering and
/// blending paths only ever see 3 channels.
pub fn load_rgb(path: &Path) -> Result<Raster, String> {
    let img = raster_io::load_png(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(ensure_rgb(img))
}

pub fn ensure_rgb(img: Raster) -> Raster {
    if img.channels() == 3 {
        return img;
    }
    let (w, h) = (img.width(), img.height());
    let mut out = Raster::new(w, h, 3, ColorTag::Srgb);
    for y in 0..h {
        for x in 0..w {
            let v = img.get(x, y, 0);
            for c in 0..3 {
                out.set(x, y, c, v);
            }
        }
    }
    out
}

/// Finds `{stem}{suffix}.png` or `{stem}{suffix}.pfm` under `dir`.
pub fn find_depth(dir: &Path, stem: &str, suffix: &str) -> Option<PathBuf> {
    for ext in ["png", "pfm"] {
        let candidate = dir.join(format!("{stem}{suffix}.{ext}"));
        if candidate.is_file() {
            return Some(candidate);
        }
    }
    None
}

/// Bilinearly resamples a depth map to the target dimensions (no-op when
/// they already match). Resampling stays inside [0, 1] because bilinear
/// output is bounded by its neighbors.
pub fn depth_to_dims(depth: DepthMap, width: usize, height: usize) -> Result<DepthMap, String> {
    if depth.width() == width && depth.height() == height {
        return Ok(depth);
    }
    let raster = Raster::from_vec(
        depth.width(),
        depth.height(),
        1,
        ColorTag::Gray,
        depth.values().to_vec(),
    )
    .map_err(|e| e.to_string())?;
    let resized = raster.resize_to(width, height).map_err(|e| e.to_string())?;
    DepthMap::from_values(width, height, resized.into_data()).map_err(|e| e.to_string())
}

/// Writes pretty-printed JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    text.push('\n');
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Line sink for JSONL reports: a file when `--out` is given, else stdout.
pub enum ReportSink {
    Stdout(std::io::Stdout),
    File(fs::File),
}

impl ReportSink {
    pub fn create(out: Option<&Path>) -> anyhow::Result<Self> {
        match out {
            Some(path) => {
                let file = fs::File::create(path)
                    .with_context(|| format!("creating report {}", path.display()))?;
                Ok(ReportSink::File(file))
            }
            None => Ok(ReportSink::Stdout(std::io::stdout())),
        }
    }

    pub fn line(&mut self, value: &impl serde::Serialize) -> anyhow::Result<()> {
        let text = serde_json::to_string(value)?;
        match self {
            ReportSink::Stdout(s) => writeln!(s, "{text}")?,
            ReportSink::File(f) => writeln!(f, "{text}")?,
        }
        Ok(())
    }
}
