//! Non-reference restoration metrics.
//!
//! Residual contrast gain asks a simple question of an (input, output)
//! pair: on the pixels the model actually touched, did local contrast go up
//! or down? Haze removal should raise it; a model that "cheats" by blurring
//! will show a negative gain. The metric is the mean change in windowed
//! standard deviation over the edited-pixel set, computed on a grayscale
//! view of the encoded images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ColorTag, Raster};

/// Default window size for local contrast.
pub const DEFAULT_WINDOW: usize = 7;

/// Default edit threshold: two 8-bit quantization steps, so re-encoding
/// noise never counts as an edit.
pub const DEFAULT_THRESHOLD: f64 = 2.0 / 255.0;

/// Outcome of one pair evaluation. Gains are in intensity units (images in
/// `[0, 1]`), signed: positive means the output has more local contrast.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    /// Mean contrast change over edited pixels; 0 when nothing was edited.
    pub residual_gain: f64,
    /// Mean contrast change over all pixels.
    pub global_gain: f64,
    /// Fraction of pixels whose value changed beyond the threshold.
    pub edited_fraction: f64,
    /// True when the edit mask is empty (residual gain is then 0 by fiat).
    pub empty_mask: bool,
}

fn require_gray(img: &Raster, what: &str) -> Result<()> {
    if img.channels() != 1 {
        return Err(Error::Shape(format!("{what} must be single-channel")));
    }
    Ok(())
}

/// Binary mask of pixels whose absolute difference exceeds the threshold
/// (strictly).
pub fn edit_mask(input: &Raster, output: &Raster, threshold: f64) -> Result<Raster> {
    require_gray(input, "edit_mask input")?;
    require_gray(output, "edit_mask output")?;
    if !input.same_dims(output) {
        return Err(Error::Shape(format!(
            "edit_mask pair {}x{} vs {}x{}",
            input.width(),
            input.height(),
            output.width(),
            output.height()
        )));
    }
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "edit threshold must be positive, got {threshold}"
        )));
    }
    let mut mask = Raster::new(input.width(), input.height(), 1, ColorTag::Gray);
    for ((m, a), b) in mask
        .data_mut()
        .iter_mut()
        .zip(input.data())
        .zip(output.data())
    {
        *m = if (a - b).abs() > threshold { 1.0 } else { 0.0 };
    }
    Ok(mask)
}

/// Symmetric-reflection index for a tap `i` relative to length `n`.
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

/// Per-pixel population standard deviation over a k×k window with symmetric
/// reflect padding, computed with integral images over the padded frame.
pub fn local_contrast(img: &Raster, k: usize) -> Result<Raster> {
    require_gray(img, "local_contrast input")?;
    if k < 3 || k.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "window size must be odd and >= 3, got {k}"
        )));
    }
    let r = k / 2;
    let (w, h) = (img.width(), img.height());
    let (pw, ph) = (w + 2 * r, h + 2 * r);

    // Padded copy, then (pw+1)x(ph+1) summed-area tables for sum and
    // sum-of-squares. Centering on the global mean costs nothing (variance
    // is shift-invariant) and kills the cancellation that would otherwise
    // turn flat regions into sqrt(epsilon)-sized noise.
    let offset = img.mean();
    let mut padded = vec![0.0f64; pw * ph];
    for py in 0..ph {
        let sy = reflect(py as isize - r as isize, h);
        for px in 0..pw {
            let sx = reflect(px as isize - r as isize, w);
            padded[py * pw + px] = img.get(sx, sy, 0) - offset;
        }
    }
    let stride = pw + 1;
    let mut sat = vec![0.0f64; stride * (ph + 1)];
    let mut sat2 = vec![0.0f64; stride * (ph + 1)];
    for py in 0..ph {
        let mut row = 0.0;
        let mut row2 = 0.0;
        for px in 0..pw {
            let v = padded[py * pw + px];
            row += v;
            row2 += v * v;
            sat[(py + 1) * stride + px + 1] = sat[py * stride + px + 1] + row;
            sat2[(py + 1) * stride + px + 1] = sat2[py * stride + px + 1] + row2;
        }
    }
    let window = |table: &[f64], x: usize, y: usize| -> f64 {
        // Window in padded coordinates: [x, x+k) x [y, y+k).
        let (x1, y1) = (x + k, y + k);
        table[y1 * stride + x1] - table[y * stride + x1] - table[y1 * stride + x]
            + table[y * stride + x]
    };
    let n = (k * k) as f64;
    let mut out = Raster::new(w, h, 1, ColorTag::Gray);
    for y in 0..h {
        for x in 0..w {
            let s = window(&sat, x, y);
            let s2 = window(&sat2, x, y);
            let mean = s / n;
            let var = (s2 / n - mean * mean).max(0.0);
            out.set(x, y, 0, var.sqrt());
        }
    }
    Ok(out)
}

/// Residual contrast gain over an (input, output) pair. The output is
/// resized to the input's dimensions first, both are reduced to grayscale,
/// and the mean contrast change is taken over the edited-pixel set (and,
/// for the global variant, over all pixels).
pub fn residual_contrast_gain(
    input: &Raster,
    output: &Raster,
    k: usize,
    threshold: f64,
) -> Result<ContrastReport> {
    let resized;
    let output = if input.same_dims(output) {
        output
    } else {
        resized = output.resize_to(input.width(), input.height())?;
        &resized
    };
    let gray_in = input.luma709();
    let gray_out = output.luma709();
    let mask = edit_mask(&gray_in, &gray_out, threshold)?;
    let c_in = local_contrast(&gray_in, k)?;
    let c_out = local_contrast(&gray_out, k)?;

    let mut edited = 0usize;
    let mut edited_sum = 0.0;
    let mut global_sum = 0.0;
    for ((m, ci), co) in mask.data().iter().zip(c_in.data()).zip(c_out.data()) {
        let delta = co - ci;
        global_sum += delta;
        if *m == 1.0 {
            edited += 1;
            edited_sum += delta;
        }
    }
    let total = mask.data().len();
    let empty_mask = edited == 0;
    Ok(ContrastReport {
        residual_gain: if empty_mask {
            0.0
        } else {
            edited_sum / edited as f64
        },
        global_gain: global_sum / total as f64,
        edited_fraction: edited as f64 / total as f64,
        empty_mask,
    })
}
