//! Training supervision: random edit masks, boundary softening,
//! strength-controlled target blending, and synthetic occlusions.
//!
//! A supervision target is a per-pixel convex blend of a source image and a
//! target image, weighted by `alpha * mask`. For effect removal the blend
//! moves the degraded input toward the clean ground truth; for effect
//! addition the roles swap. Blending happens in whatever color space the
//! inputs are in — batch tooling feeds encoded sRGB and records that choice
//! in the sample metadata so either convention can be reproduced.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedural;
use crate::raster::{ColorTag, Raster};

/// Shape-sampling ranges for random masks. All fractions are relative to
/// `min(width, height)`; two-element arrays are `[lo, hi]` ranges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskSpec {
    pub n_rects: [u32; 2],
    /// Rectangle side length as a fraction of the shorter image side.
    pub rect_scale: [f64; 2],
    pub n_strokes: [u32; 2],
    /// Stroke thickness as a fraction of the shorter image side.
    pub stroke_width: [f64; 2],
    /// Probability of an all-ones mask covering the whole frame.
    pub p_full_frame: f64,
    /// Dilation radius range (fraction of the shorter side).
    pub dilation_radius: [f64; 2],
    /// Gaussian sigma range (fraction of the shorter side).
    pub blur_sigma: [f64; 2],
}

impl Default for MaskSpec {
    fn default() -> Self {
        MaskSpec {
            n_rects: [1, 4],
            rect_scale: [0.1, 0.5],
            n_strokes: [0, 4],
            stroke_width: [0.02, 0.08],
            p_full_frame: 0.3,
            dilation_radius: [0.01, 0.03],
            blur_sigma: [0.005, 0.015],
        }
    }
}

impl MaskSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.p_full_frame)
            && self.n_rects[0] <= self.n_rects[1]
            && self.n_strokes[0] <= self.n_strokes[1]
            && self.rect_scale[0] > 0.0
            && self.rect_scale[0] <= self.rect_scale[1]
            && self.rect_scale[1] <= 1.0
            && self.stroke_width[0] > 0.0
            && self.stroke_width[0] <= self.stroke_width[1]
            && self.stroke_width[1] <= 1.0
            && self.dilation_radius[0] >= 0.0
            && self.dilation_radius[0] <= self.dilation_radius[1]
            && self.blur_sigma[0] >= 0.0
            && self.blur_sigma[0] <= self.blur_sigma[1];
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad mask spec: {self:?}")))
        }
    }
}

fn draw_count(rng: &mut ChaCha8Rng, r: [u32; 2]) -> u32 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

fn draw_frac(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

fn stamp_disc(mask: &mut Raster, cx: f64, cy: f64, radius: f64) {
    let r2 = radius * radius;
    let x_lo = ((cx - radius).floor().max(0.0)) as usize;
    let y_lo = ((cy - radius).floor().max(0.0)) as usize;
    let x_hi = ((cx + radius).ceil() as usize).min(mask.width() - 1);
    let y_hi = ((cy + radius).ceil() as usize).min(mask.height() - 1);
    if cx + radius < 0.0 || cy + radius < 0.0 {
        return;
    }
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            if dx * dx + dy * dy <= r2 {
                mask.set(x, y, 0, 1.0);
            }
        }
    }
}

/// Samples a strictly binary mask: with probability `p_full_frame` the whole
/// frame, otherwise the union of random axis-aligned rectangles and
/// free-form random-walk strokes.
pub fn synth_mask(width: usize, height: usize, spec: &MaskSpec, seed: u64) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = Raster::new(width, height, 1, ColorTag::Gray);
    if rng.random::<f64>() < spec.p_full_frame {
        mask.data_mut().fill(1.0);
        return mask;
    }
    let short = width.min(height) as f64;

    let n_rects = draw_count(&mut rng, spec.n_rects);
    for _ in 0..n_rects {
        let rw = ((draw_frac(&mut rng, spec.rect_scale) * short).round() as usize).clamp(1, width);
        let rh = ((draw_frac(&mut rng, spec.rect_scale) * short).round() as usize).clamp(1, height);
        let x0 = rng.random_range(0..=(width - rw));
        let y0 = rng.random_range(0..=(height - rh));
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                mask.set(x, y, 0, 1.0);
            }
        }
    }

    let n_strokes = draw_count(&mut rng, spec.n_strokes);
    for _ in 0..n_strokes {
        let radius = (draw_frac(&mut rng, spec.stroke_width) * short * 0.5).max(0.5);
        let mut x = rng.random_range(0.0..width as f64);
        let mut y = rng.random_range(0.0..height as f64);
        let mut angle = rng.random_range(0.0..std::f64::consts::TAU);
        let segments = rng.random_range(4..=12);
        stamp_disc(&mut mask, x, y, radius);
        for _ in 0..segments {
            angle += rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
            let len = rng.random_range(0.05..0.15) * short;
            let (dx, dy) = (angle.cos(), angle.sin());
            // Stamp overlapping discs along the segment so the stroke is a
            // solid band rather than a dotted line.
            let spacing = (radius * 0.5).max(0.5);
            let n = (len / spacing).ceil() as usize;
            for i in 1..=n {
                let t = i as f64 * spacing;
                stamp_disc(&mut mask, x + dx * t.min(len), y + dy * t.min(len), radius);
            }
            x += dx * len;
            y += dy * len;
        }
    }
    mask
}

/// Squared-distance transform of one scanline (lower envelope of parabolas).
fn dt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let sq = |i: usize| f[i] + (i * i) as f64;
        let mut s = (sq(q) - sq(v[k])) / (2.0 * (q - v[k]) as f64);
        while s <= z[k] {
            k -= 1;
            s = (sq(q) - sq(v[k])) / (2.0 * (q - v[k]) as f64);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, slot) in out.iter_mut().enumerate().take(n) {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *slot = d * d + f[v[k]];
    }
}

/// Exact Euclidean squared distance to the nearest nonzero mask pixel.
fn squared_distance_to_ones(mask: &Raster) -> Vec<f64> {
    let (w, h) = (mask.width(), mask.height());
    const FAR: f64 = 1e18;
    let mut grid: Vec<f64> = mask
        .data()
        .iter()
        .map(|&v| if v > 0.5 { 0.0 } else { FAR })
        .collect();
    // Column pass, then row pass.
    let mut col_in = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col_in[y] = grid[y * w + x];
        }
        dt_1d(&col_in, &mut col_out);
        for y in 0..h {
            grid[y * w + x] = col_out[y];
        }
    }
    let mut row_out = vec![0.0; w];
    for y in 0..h {
        dt_1d(&grid[y * w..(y + 1) * w], &mut row_out);
        grid[y * w..(y + 1) * w].copy_from_slice(&row_out);
    }
    grid
}

/// Reflect (symmetric) index mapping for out-of-range taps.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -1 - i;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Separable Gaussian blur on a single-channel raster, kernel truncated at
/// three sigma and renormalized, symmetric reflection at the borders.
fn gaussian_blur_gray(img: &Raster, sigma: f64) -> Raster {
    let radius = (3.0 * sigma).ceil() as isize;
    if sigma <= 0.0 || radius < 1 {
        return img.clone();
    }
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for i in -radius..=radius {
        kernel.push((-((i * i) as f64) / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }
    let (w, h) = (img.width(), img.height());
    let mut tmp = Raster::new(w, h, 1, ColorTag::Gray);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let sx = reflect(x as isize + ki as isize - radius, w);
                acc += k * img.get(sx, y, 0);
            }
            tmp.set(x, y, 0, acc);
        }
    }
    let mut out = Raster::new(w, h, 1, ColorTag::Gray);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let sy = reflect(y as isize + ki as isize - radius, h);
                acc += k * tmp.get(x, sy, 0);
            }
            out.set(x, y, 0, acc.clamp(0.0, 1.0));
        }
    }
    out
}

/// Softens a binary mask: morphological dilation with a disc of the given
/// radius, then Gaussian blur. Values stay in `[0, 1]`; the interior of a
/// large region remains at 1 because the truncated kernel sees only ones.
pub fn soften_mask(mask: &Raster, dilation_radius_px: f64, blur_sigma_px: f64) -> Result<Raster> {
    if mask.channels() != 1 {
        return Err(Error::Shape("mask must be single-channel".into()));
    }
    if mask.data().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument(
            "soften_mask expects a strictly binary mask".into(),
        ));
    }
    if !(dilation_radius_px >= 0.0 && blur_sigma_px >= 0.0) {
        return Err(Error::InvalidArgument(
            "dilation radius and blur sigma must be >= 0".into(),
        ));
    }
    let dilated = if dilation_radius_px > 0.0 && mask.data().contains(&1.0) {
        let d2 = squared_distance_to_ones(mask);
        let r2 = dilation_radius_px * dilation_radius_px;
        let mut out = Raster::new(mask.width(), mask.height(), 1, ColorTag::Gray);
        for (slot, d) in out.data_mut().iter_mut().zip(&d2) {
            *slot = if *d <= r2 { 1.0 } else { 0.0 };
        }
        out
    } else {
        mask.clone()
    };
    Ok(gaussian_blur_gray(&dilated, blur_sigma_px))
}

/// Which way the supervision pair points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Blend the degraded input toward the clean ground truth.
    Remove,
    /// Swap roles: teach the model to synthesize the effect instead.
    Add,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Remove => "remove",
            Direction::Add => "add",
        }
    }
}

/// Strength, soft mask, and direction for one supervision target.
#[derive(Clone, Debug)]
pub struct SupervisionSpec {
    pub strength_alpha: f64,
    /// Soft weights in `[0, 1]` (typically a softened binary mask).
    pub mask: Raster,
    pub direction: Direction,
}

/// Per-pixel convex blend `out = a*target + (1-a)*source` with
/// `a = alpha * mask`. `direction` picks which input plays the target role.
/// The endpoints are exact: `a = 0` returns the source sample bitwise and
/// `a = 1` the target sample bitwise.
pub fn compose_target(input: &Raster, gt: &Raster, spec: &SupervisionSpec) -> Result<Raster> {
    if !input.same_shape(gt) {
        return Err(Error::Shape(format!(
            "input {}x{}x{} does not match ground truth {}x{}x{}",
            input.width(),
            input.height(),
            input.channels(),
            gt.width(),
            gt.height(),
            gt.channels()
        )));
    }
    if spec.mask.channels() != 1 || !spec.mask.same_dims(input) {
        return Err(Error::Shape(
            "mask must be single-channel with matching dimensions".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.strength_alpha) {
        return Err(Error::InvalidArgument(format!(
            "strength alpha must lie in [0, 1], got {}",
            spec.strength_alpha
        )));
    }
    if spec.mask.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidArgument(
            "mask values must lie in [0, 1]".into(),
        ));
    }
    let (target, source) = match spec.direction {
        Direction::Remove => (gt, input),
        Direction::Add => (input, gt),
    };
    let mut out = Raster::new(
        input.width(),
        input.height(),
        input.channels(),
        input.color_tag(),
    );
    for y in 0..input.height() {
        for x in 0..input.width() {
            let a = spec.strength_alpha * spec.mask.get(x, y, 0);
            for c in 0..input.channels() {
                let t = target.get(x, y, c);
                let s = source.get(x, y, c);
                let v = if a == 1.0 {
                    t
                } else if a == 0.0 {
                    s
                } else {
                    a * t + (1.0 - a) * s
                };
                out.set(x, y, c, v);
            }
        }
    }
    Ok(out)
}

/// Draws a removal strength: uniform on `[0, 1)` with a probability spike of
/// 0.5 at exactly 1 (full removal is the dominant training case).
pub fn draw_strength(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<f64>() < 0.5 {
        1.0
    } else {
        rng.random::<f64>()
    }
}

/// How an occlusion region is filled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OcclusionFill {
    Flat,
    Noise,
}

/// One synthetic occlusion: the degraded image, the binary mask that was
/// overlaid, and the draw that produced it.
#[derive(Clone, Debug)]
pub struct OcclusionSample {
    pub degraded: Raster,
    pub mask: Raster,
    pub opacity: f64,
    pub fill: OcclusionFill,
    pub fill_color: [f64; 3],
}

/// Alpha-composites `fill` over `clean` inside the mask:
/// `out = opacity*fill + (1-opacity)*clean` where mask = 1, `clean`
/// elsewhere (bitwise).
pub fn apply_occlusion(
    clean: &Raster,
    mask: &Raster,
    fill: &Raster,
    opacity: f64,
) -> Result<Raster> {
    if !clean.same_shape(fill) || !clean.same_dims(mask) || mask.channels() != 1 {
        return Err(Error::Shape(
            "occlusion inputs must share dimensions (mask single-channel)".into(),
        ));
    }
    if !(0.0..=1.0).contains(&opacity) {
        return Err(Error::InvalidArgument(format!(
            "opacity must lie in [0, 1], got {opacity}"
        )));
    }
    let mut out = clean.clone();
    for y in 0..clean.height() {
        for x in 0..clean.width() {
            if mask.get(x, y, 0) > 0.5 {
                for c in 0..clean.channels() {
                    let v = if opacity == 1.0 {
                        fill.get(x, y, c)
                    } else {
                        opacity * fill.get(x, y, c) + (1.0 - opacity) * clean.get(x, y, c)
                    };
                    out.set(x, y, c, v);
                }
            }
        }
    }
    Ok(out)
}

/// Overlays a random semi-transparent or opaque region on a clean image.
/// The fill is a flat random color or the same color modulated by gradient
/// noise; opacity is drawn from `[0.3, 1.0]`. Compositing happens in
/// the image's stored color space. Full-frame masks are disabled here so an
/// opaque draw can never blot out the entire image.
pub fn synth_occlusion(clean: &Raster, spec: &MaskSpec, seed: u64) -> Result<OcclusionSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask_spec = spec.clone();
    mask_spec.p_full_frame = 0.0;
    let mask_seed = rng.random::<u64>();
    let mask = synth_mask(clean.width(), clean.height(), &mask_spec, mask_seed);

    let opacity = rng.random_range(0.3..=1.0);
    let fill_color = [
        rng.random::<f64>(),
        rng.random::<f64>(),
        rng.random::<f64>(),
    ];
    let fill_kind = if rng.random::<f64>() < 0.5 {
        OcclusionFill::Flat
    } else {
        OcclusionFill::Noise
    };
    let mut fill = Raster::new(
        clean.width(),
        clean.height(),
        clean.channels(),
        clean.color_tag(),
    );
    match fill_kind {
        OcclusionFill::Flat => {
            for y in 0..fill.height() {
                for x in 0..fill.width() {
                    for c in 0..fill.channels() {
                        fill.set(x, y, c, fill_color[c.min(2)]);
                    }
                }
            }
        }
        OcclusionFill::Noise => {
            let noise_seed = rng.random::<u64>();
            let texture =
                procedural::gradient_noise(clean.width(), clean.height(), 8.0, 2, noise_seed);
            for y in 0..fill.height() {
                for x in 0..fill.width() {
                    let t = texture.get(x, y, 0) * 0.25;
                    for c in 0..fill.channels() {
                        fill.set(x, y, c, (fill_color[c.min(2)] + t).clamp(0.0, 1.0));
                    }
                }
            }
        }
    }
    let degraded = apply_occlusion(clean, &mask, &fill, opacity)?;
    Ok(OcclusionSample {
        degraded,
        mask,
        opacity,
        fill: fill_kind,
        fill_color,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_with(p_full: f64, rects: [u32; 2], strokes: [u32; 2]) -> MaskSpec {
        MaskSpec {
            p_full_frame: p_full,
            n_rects: rects,
            n_strokes: strokes,
            ..MaskSpec::default()
        }
    }

    #[test]
    fn full_frame_branch_is_forced() {
        let m = synth_mask(16, 12, &spec_with(1.0, [1, 4], [0, 4]), 3);
        assert!(m.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn empty_spec_gives_empty_mask() {
        let m = synth_mask(16, 12, &spec_with(0.0, [0, 0], [0, 0]), 3);
        assert!(m.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn masks_are_binary_and_deterministic() {
        let spec = MaskSpec::default();
        for seed in 0..20u64 {
            let a = synth_mask(48, 32, &spec, seed);
            let b = synth_mask(48, 32, &spec, seed);
            assert_eq!(a, b);
            assert!(a.data().iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }

    #[test]
    fn strokes_cover_some_pixels() {
        let m = synth_mask(64, 64, &spec_with(0.0, [0, 0], [2, 2]), 9);
        let on = m.data().iter().filter(|&&v| v == 1.0).count();
        assert!(on > 0, "strokes painted nothing");
    }

    #[test]
    fn soften_full_and_empty_masks() {
        let ones = Raster::filled(16, 16, 1, ColorTag::Gray, 1.0);
        let soft = soften_mask(&ones, 2.0, 1.0).unwrap();
        assert!(soft.data().iter().all(|&v| (v - 1.0).abs() < 1e-6));

        let zeros = Raster::new(16, 16, 1, ColorTag::Gray);
        let soft = soften_mask(&zeros, 2.0, 1.0).unwrap();
        assert!(soft.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn soften_single_pixel_blob_decays_radially() {
        let mut m = Raster::new(15, 15, 1, ColorTag::Gray);
        m.set(7, 7, 0, 1.0);
        let soft = soften_mask(&m, 2.0, 1.0).unwrap();
        let center = soft.get(7, 7, 0);
        assert!(center > soft.get(7, 10, 0));
        assert!(soft.get(7, 10, 0) > soft.get(7, 13, 0));
        // Monotone decay along a row moving away from the blob.
        let mut prev = center;
        for x in 8..15 {
            let v = soft.get(x, 7, 0);
            assert!(v <= prev + 1e-12, "x={x}: {v} > {prev}");
            prev = v;
        }
        // Direct convolution oracle at the center: dilation turns the pixel
        // into a disc of radius 2, which the kernel then averages.
        let d2 = {
            let mut dil = Raster::new(15, 15, 1, ColorTag::Gray);
            for y in 0..15i32 {
                for x in 0..15i32 {
                    if (x - 7).pow(2) + (y - 7).pow(2) <= 4 {
                        dil.set(x as usize, y as usize, 0, 1.0);
                    }
                }
            }
            dil
        };
        let sigma = 1.0f64;
        let radius = 3i32;
        let mut kern = vec![];
        for i in -radius..=radius {
            kern.push((-((i * i) as f64) / (2.0 * sigma * sigma)).exp());
        }
        let s: f64 = kern.iter().sum();
        let mut expect = 0.0;
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                expect += kern[(dx + radius) as usize] / s * kern[(dy + radius) as usize] / s
                    * d2.get((7 + dx) as usize, (7 + dy) as usize, 0);
            }
        }
        assert!(
            (center - expect).abs() < 1e-9,
            "center {center} vs oracle {expect}"
        );
    }

    #[test]
    fn soften_interior_of_large_region_stays_one() {
        let mut m = Raster::new(32, 32, 1, ColorTag::Gray);
        for y in 4..28 {
            for x in 4..28 {
                m.set(x, y, 0, 1.0);
            }
        }
        let soft = soften_mask(&m, 2.0, 1.5).unwrap();
        assert!((soft.get(16, 16, 0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn soften_rejects_nonbinary_mask() {
        let m = Raster::filled(4, 4, 1, ColorTag::Gray, 0.5);
        assert!(matches!(
            soften_mask(&m, 1.0, 1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    fn pair(w: usize, h: usize) -> (Raster, Raster) {
        let mut input = Raster::new(w, h, 3, ColorTag::Srgb);
        let mut gt = Raster::new(w, h, 3, ColorTag::Srgb);
        for (i, v) in input.data_mut().iter_mut().enumerate() {
            *v = ((i * 7) % 256) as f64 / 255.0;
        }
        for (i, v) in gt.data_mut().iter_mut().enumerate() {
            *v = ((i * 13 + 40) % 256) as f64 / 255.0;
        }
        (input, gt)
    }

    #[test]
    fn compose_endpoints_are_bitwise() {
        let (input, gt) = pair(6, 4);
        let ones = Raster::filled(6, 4, 1, ColorTag::Gray, 1.0);
        let out = compose_target(
            &input,
            &gt,
            &SupervisionSpec {
                strength_alpha: 1.0,
                mask: ones.clone(),
                direction: Direction::Remove,
            },
        )
        .unwrap();
        assert_eq!(out.data(), gt.data());

        let out = compose_target(
            &input,
            &gt,
            &SupervisionSpec {
                strength_alpha: 0.0,
                mask: ones,
                direction: Direction::Remove,
            },
        )
        .unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn compose_scalar_oracle() {
        let input = Raster::filled(2, 2, 3, ColorTag::Srgb, 0.2);
        let gt = Raster::filled(2, 2, 3, ColorTag::Srgb, 0.8);
        let out = compose_target(
            &input,
            &gt,
            &SupervisionSpec {
                strength_alpha: 0.5,
                mask: Raster::filled(2, 2, 1, ColorTag::Gray, 1.0),
                direction: Direction::Remove,
            },
        )
        .unwrap();
        assert!((out.get(0, 0, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn compose_add_swaps_roles() {
        let (input, gt) = pair(4, 4);
        let ones = Raster::filled(4, 4, 1, ColorTag::Gray, 1.0);
        let out = compose_target(
            &input,
            &gt,
            &SupervisionSpec {
                strength_alpha: 1.0,
                mask: ones,
                direction: Direction::Add,
            },
        )
        .unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn region_outside_mask_is_bitwise_source() {
        let (input, gt) = pair(8, 8);
        let mut mask = Raster::new(8, 8, 1, ColorTag::Gray);
        for y in 2..5 {
            for x in 2..5 {
                mask.set(x, y, 0, 0.8);
            }
        }
        let out = compose_target(
            &input,
            &gt,
            &SupervisionSpec {
                strength_alpha: 0.7,
                mask: mask.clone(),
                direction: Direction::Remove,
            },
        )
        .unwrap();
        for y in 0..8 {
            for x in 0..8 {
                if mask.get(x, y, 0) == 0.0 {
                    for c in 0..3 {
                        assert_eq!(out.get(x, y, c).to_bits(), input.get(x, y, c).to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn compose_output_is_convex_combination() {
        let (input, gt) = pair(6, 6);
        let mask = Raster::filled(6, 6, 1, ColorTag::Gray, 0.6);
        let out = compose_target(
            &input,
            &gt,
            &SupervisionSpec {
                strength_alpha: 0.9,
                mask,
                direction: Direction::Remove,
            },
        )
        .unwrap();
        for ((o, i), g) in out.data().iter().zip(input.data()).zip(gt.data()) {
            let lo = i.min(*g) - 1e-12;
            let hi = i.max(*g) + 1e-12;
            assert!(*o >= lo && *o <= hi);
        }
    }

    #[test]
    fn alpha_monotone_per_pixel() {
        let (input, gt) = pair(5, 5);
        let mask = Raster::filled(5, 5, 1, ColorTag::Gray, 0.8);
        let mut prev: Option<Raster> = None;
        for i in 0..=10 {
            let alpha = i as f64 / 10.0;
            let out = compose_target(
                &input,
                &gt,
                &SupervisionSpec {
                    strength_alpha: alpha,
                    mask: mask.clone(),
                    direction: Direction::Remove,
                },
            )
            .unwrap();
            if let Some(prev) = &prev {
                for ((o, p), (i_v, g_v)) in out
                    .data()
                    .iter()
                    .zip(prev.data())
                    .zip(input.data().iter().zip(gt.data()))
                {
                    // Each pixel moves toward gt (the target side) as alpha grows.
                    let step = o - p;
                    let dir = g_v - i_v;
                    assert!(step * dir >= -1e-12, "step {step} against direction {dir}");
                }
            }
            prev = Some(out);
        }
    }

    #[test]
    fn draw_strength_spikes_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let n = 20_000;
        let mut ones = 0usize;
        for _ in 0..n {
            let a = draw_strength(&mut rng);
            assert!((0.0..=1.0).contains(&a));
            if a == 1.0 {
                ones += 1;
            }
        }
        let frac = ones as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.02, "spike fraction {frac}");
    }

    #[test]
    fn occlusion_composite_oracle() {
        let clean = Raster::filled(4, 4, 3, ColorTag::Srgb, 0.5);
        let mut mask = Raster::new(4, 4, 1, ColorTag::Gray);
        mask.set(1, 1, 0, 1.0);
        let fill = Raster::filled(4, 4, 3, ColorTag::Srgb, 1.0);
        let out = apply_occlusion(&clean, &mask, &fill, 0.3).unwrap();
        assert!((out.get(1, 1, 0) - 0.65).abs() < 1e-12);
        // Outside the mask the pixels are untouched.
        assert_eq!(out.get(0, 0, 0).to_bits(), clean.get(0, 0, 0).to_bits());

        let out = apply_occlusion(&clean, &mask, &fill, 1.0).unwrap();
        assert_eq!(out.get(1, 1, 0), 1.0);
    }

    #[test]
    fn synth_occlusion_is_deterministic_and_bounded() {
        let mut clean = Raster::new(32, 24, 3, ColorTag::Srgb);
        for (i, v) in clean.data_mut().iter_mut().enumerate() {
            *v = ((i * 31) % 256) as f64 / 255.0;
        }
        let spec = MaskSpec::default();
        let a = synth_occlusion(&clean, &spec, 5).unwrap();
        let b = synth_occlusion(&clean, &spec, 5).unwrap();
        assert_eq!(a.degraded, b.degraded);
        assert_eq!(a.mask, b.mask);
        assert!(a.opacity >= 0.3 && a.opacity <= 1.0);
        assert!(a.degraded.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        // Untouched outside the mask.
        for y in 0..24 {
            for x in 0..32 {
                if a.mask.get(x, y, 0) == 0.0 {
                    for c in 0..3 {
                        assert_eq!(
                            a.degraded.get(x, y, c).to_bits(),
                            clean.get(x, y, c).to_bits()
                        );
                    }
                }
            }
        }
    }
}
