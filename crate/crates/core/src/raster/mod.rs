//! Image buffers, color-space conversion, and resampling.
//!
//! Every stage of the pipeline moves pixels through [`Raster`]: a row-major,
//! interleaved `f64` buffer of 1 or 3 channels carrying a [`ColorTag`] that
//! says which domain the samples live in. Physics (transmittance, airlight
//! compositing) is only valid in linear light, so files are decoded on load,
//! processed, and re-encoded on save; the tag exists to make accidental
//! double-encoding a typed error instead of a silent quality bug.
//!
//! Conventions used throughout:
//! - sample values are nominally in `[0, 1]`; intermediate math may exceed
//!   that and is clamped at well-defined points (before encode, before save),
//! - `(x, y)` addresses column `x` of row `y`, origin at the top-left,
//! - continuous sampling coordinates are in pixel units where integer
//!   coordinates land exactly on pixel centers.

pub mod io;

pub use io::{load_depth, load_png, save_png, save_png16};

use crate::error::{Error, Result};

/// sRGB electro-optical transfer function for a single component (IEC
/// 61966-2-1 piecewise curve). Input is an encoded value in `[0, 1]`.
pub fn srgb_decode_value(u: f64) -> f64 {
    if u <= 0.04045 {
        u / 12.92
    } else {
        ((u + 0.055) / 1.055).powf(2.4)
    }
}

/// Inverse of [`srgb_decode_value`] for a linear-light component in `[0, 1]`.
pub fn srgb_encode_value(v: f64) -> f64 {
    if v <= 0.0031308 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

/// Rec. 709 luma weights, applied to encoded sRGB components when a
/// single-channel view of a color image is needed.
pub const LUMA_709: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// Which domain a raster's samples live in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColorTag {
    /// Linear-light RGB; the only domain the atmosphere math accepts.
    LinearRgb,
    /// Gamma-encoded sRGB, as stored in ordinary 8/16-bit files.
    Srgb,
    /// Single-channel data: masks, noise fields, luma, depth dumps.
    Gray,
}

impl ColorTag {
    pub fn name(self) -> &'static str {
        match self {
            ColorTag::LinearRgb => "linear-rgb",
            ColorTag::Srgb => "srgb",
            ColorTag::Gray => "gray",
        }
    }
}

/// W×H×C floating-point image, row-major and channel-interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    color_tag: ColorTag,
    data: Vec<f64>,
}

impl Raster {
    /// Zero-filled raster. Panics on zero dimensions or a channel count other
    /// than 1 or 3; those are construction bugs, not data errors.
    pub fn new(width: usize, height: usize, channels: usize, color_tag: ColorTag) -> Self {
        Self::filled(width, height, channels, color_tag, 0.0)
    }

    /// Constant-valued raster.
    pub fn filled(
        width: usize,
        height: usize,
        channels: usize,
        color_tag: ColorTag,
        value: f64,
    ) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be nonzero");
        assert!(
            channels == 1 || channels == 3,
            "raster must have 1 or 3 channels"
        );
        Raster {
            width,
            height,
            channels,
            color_tag,
            data: vec![value; width * height * channels],
        }
    }

    /// Wraps an existing buffer, validating length and finiteness.
    pub fn from_vec(
        width: usize,
        height: usize,
        channels: usize,
        color_tag: ColorTag,
        data: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 || !(channels == 1 || channels == 3) {
            return Err(Error::InvalidArgument(format!(
                "bad raster shape {width}x{height}x{channels}"
            )));
        }
        let expect = width * height * channels;
        if data.len() != expect {
            return Err(Error::Shape(format!(
                "buffer length {} does not match {width}x{height}x{channels} = {expect}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "raster samples must be finite".into(),
            ));
        }
        Ok(Raster {
            width,
            height,
            channels,
            color_tag,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn color_tag(&self) -> ColorTag {
        self.color_tag
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterprets the samples under a different tag without touching them.
    pub fn with_tag(mut self, tag: ColorTag) -> Self {
        self.color_tag = tag;
        self
    }

    #[inline]
    fn idx(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        self.data[self.idx(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        let i = self.idx(x, y, c);
        self.data[i] = v;
    }

    /// All channels of one pixel as a slice.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = self.idx(x, y, 0);
        &self.data[i..i + self.channels]
    }

    pub fn same_dims(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.same_dims(other) && self.channels == other.channels
    }

    /// Element-wise map into a new raster with the given tag.
    pub fn map(&self, tag: ColorTag, f: impl Fn(f64) -> f64) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            color_tag: tag,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Clamps every sample into `[0, 1]` in place.
    pub fn clamp01(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Rec. 709 luma of a color raster, taken on the samples as stored
    /// (no decode). Single-channel rasters pass through retagged.
    pub fn luma709(&self) -> Raster {
        if self.channels == 1 {
            return self.clone().with_tag(ColorTag::Gray);
        }
        let mut out = Raster::new(self.width, self.height, 1, ColorTag::Gray);
        for y in 0..self.height {
            for x in 0..self.width {
                let p = self.pixel(x, y);
                out.set(
                    x,
                    y,
                    0,
                    LUMA_709[0] * p[0] + LUMA_709[1] * p[1] + LUMA_709[2] * p[2],
                );
            }
        }
        out
    }

    /// Bilinear sample of one channel at a continuous pixel coordinate.
    ///
    /// Coordinates are clamped to the valid pixel rectangle before weighting,
    /// so out-of-bounds lookups return edge values rather than darkening.
    /// The three-lerp formulation returns stored values bitwise at integer
    /// coordinates and preserves constant fields exactly.
    #[inline]
    pub fn sample_bilinear_ch(&self, x: f64, y: f64, c: usize) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
        let top = lerp(self.get(x0, y0, c), self.get(x1, y0, c), fx);
        let bot = lerp(self.get(x0, y1, c), self.get(x1, y1, c), fx);
        lerp(top, bot, fy)
    }

    /// Bilinear sample of every channel; see [`Raster::sample_bilinear_ch`].
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Vec<f64> {
        (0..self.channels)
            .map(|c| self.sample_bilinear_ch(x, y, c))
            .collect()
    }

    /// Bilinear resize to the given dimensions using half-pixel-center
    /// source mapping. Returns a bitwise clone when dimensions already match.
    pub fn resize_to(&self, width: usize, height: usize) -> Result<Raster> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(
                "resize target dimensions must be nonzero".into(),
            ));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut out = Raster::new(width, height, self.channels, self.color_tag);
        for y in 0..height {
            let src_y = (y as f64 + 0.5) * sy - 0.5;
            for x in 0..width {
                let src_x = (x as f64 + 0.5) * sx - 0.5;
                for c in 0..self.channels {
                    out.set(x, y, c, self.sample_bilinear_ch(src_x, src_y, c));
                }
            }
        }
        Ok(out)
    }
}

/// Decodes an sRGB-tagged raster to linear light.
pub fn srgb_decode(img: &Raster) -> Result<Raster> {
    if img.color_tag != ColorTag::Srgb {
        return Err(Error::TagMismatch {
            expected: ColorTag::Srgb.name(),
            found: img.color_tag.name(),
        });
    }
    Ok(img.map(ColorTag::LinearRgb, srgb_decode_value))
}

/// Encodes a linear-light raster back to sRGB, clamping into `[0, 1]` first.
pub fn srgb_encode(img: &Raster) -> Result<Raster> {
    if img.color_tag != ColorTag::LinearRgb {
        return Err(Error::TagMismatch {
            expected: ColorTag::LinearRgb.name(),
            found: img.color_tag.name(),
        });
    }
    Ok(img.map(ColorTag::Srgb, |v| srgb_encode_value(v.clamp(0.0, 1.0))))
}

/// Normalized scene depth paired with a raster: `1.0` is the farthest point,
/// scaled to meters by the render parameters' `d_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthMap {
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(
                "depth map dimensions must be nonzero".into(),
            ));
        }
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "depth buffer length {} does not match {width}x{height}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(
                "depth values must lie in [0, 1]".into(),
            ));
        }
        Ok(DepthMap {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.values[y * self.width + x]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decode_fixed_points_and_midgray() {
        assert_eq!(srgb_decode_value(0.0), 0.0);
        assert!((srgb_decode_value(1.0) - 1.0).abs() < 1e-12);
        // Scalar oracle for the piecewise EOTF at encoded 128/255.
        let mid = srgb_decode_value(128.0 / 255.0);
        assert!((mid - 0.21586050011389926).abs() < 1e-9, "got {mid}");
    }

    #[test]
    fn encode_decode_round_trip() {
        for i in 0..=9 {
            let x = 0.1 * i as f64;
            let rt = srgb_encode_value(srgb_decode_value(x));
            assert!((rt - x).abs() < 1e-6, "round trip at {x}: {rt}");
            let rt2 = srgb_decode_value(srgb_encode_value(x));
            assert!((rt2 - x).abs() < 1e-6, "reverse round trip at {x}: {rt2}");
        }
    }

    #[test]
    fn decode_requires_srgb_tag() {
        let img = Raster::filled(2, 2, 3, ColorTag::LinearRgb, 0.5);
        assert!(matches!(srgb_decode(&img), Err(Error::TagMismatch { .. })));
        let img = Raster::filled(2, 2, 3, ColorTag::Srgb, 0.5);
        assert!(matches!(srgb_encode(&img), Err(Error::TagMismatch { .. })));
    }

    #[test]
    fn bilinear_integer_coords_hit_stored_pixels() {
        let img = Raster::from_vec(2, 2, 1, ColorTag::Gray, vec![0.1, 0.7, 0.3, 0.9]).unwrap();
        assert_eq!(img.sample_bilinear_ch(0.0, 0.0, 0), 0.1);
        assert_eq!(img.sample_bilinear_ch(1.0, 0.0, 0), 0.7);
        assert_eq!(img.sample_bilinear_ch(0.0, 1.0, 0), 0.3);
        assert_eq!(img.sample_bilinear_ch(1.0, 1.0, 0), 0.9);
    }

    #[test]
    fn bilinear_midpoint_and_clamp() {
        let img = Raster::from_vec(2, 1, 1, ColorTag::Gray, vec![0.0, 1.0]).unwrap();
        assert_eq!(img.sample_bilinear_ch(0.5, 0.0, 0), 0.5);
        // Far out of bounds clamps to the nearest edge pixel.
        assert_eq!(img.sample_bilinear_ch(-5.0, -5.0, 0), 0.0);
        assert_eq!(img.sample_bilinear_ch(50.0, 50.0, 0), 1.0);
    }

    #[test]
    fn resize_identity_is_bitwise() {
        let img = Raster::from_vec(2, 2, 1, ColorTag::Gray, vec![0.25, 0.5, 0.75, 1.0]).unwrap();
        let same = img.resize_to(2, 2).unwrap();
        assert_eq!(img, same);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let img = Raster::filled(2, 2, 3, ColorTag::Srgb, 0.42);
        for (w, h) in [(1, 1), (3, 5), (7, 2), (16, 16)] {
            let r = img.resize_to(w, h).unwrap();
            assert!(r.data().iter().all(|&v| (v - 0.42).abs() < 1e-12));
        }
    }

    #[test]
    fn resize_4x4_gradient_to_2x2_gives_block_means() {
        // Gradient (y*4+x)/15; at an exact 2x downscale with half-pixel
        // centers each output equals the mean of its 2x2 source block.
        let data: Vec<f64> = (0..16).map(|i| i as f64 / 15.0).collect();
        let img = Raster::from_vec(4, 4, 1, ColorTag::Gray, data).unwrap();
        let out = img.resize_to(2, 2).unwrap();
        let expect = [
            (0, 0, 0.16666666666666666),
            (1, 0, 0.30000000000000004),
            (0, 1, 0.7),
            (1, 1, 0.8333333333333333),
        ];
        for (x, y, v) in expect {
            assert!(
                (out.get(x, y, 0) - v).abs() < 1e-6,
                "({x},{y}) = {}, want {v}",
                out.get(x, y, 0)
            );
        }
    }

    #[test]
    fn resize_rejects_zero_target() {
        let img = Raster::filled(2, 2, 1, ColorTag::Gray, 0.0);
        assert!(matches!(
            img.resize_to(0, 2),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn from_vec_validates_shape_and_finiteness() {
        assert!(matches!(
            Raster::from_vec(2, 2, 1, ColorTag::Gray, vec![0.0; 3]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            Raster::from_vec(2, 1, 1, ColorTag::Gray, vec![0.0, f64::NAN]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn luma_709_weights() {
        let img = Raster::from_vec(1, 1, 3, ColorTag::Srgb, vec![1.0, 0.5, 0.25]).unwrap();
        let l = img.luma709();
        let want = 0.2126 * 1.0 + 0.7152 * 0.5 + 0.0722 * 0.25;
        assert!((l.get(0, 0, 0) - want).abs() < 1e-12);
        assert_eq!(l.color_tag(), ColorTag::Gray);
    }

    #[test]
    fn depth_map_validates_range() {
        assert!(DepthMap::from_values(2, 1, vec![0.0, 1.0]).is_ok());
        assert!(DepthMap::from_values(2, 1, vec![0.0, 1.2]).is_err());
        assert!(DepthMap::from_values(2, 1, vec![0.0]).is_err());
    }

    proptest! {
        #[test]
        fn prop_round_trip_identity(x in 0.0f64..=1.0) {
            let rt = srgb_encode_value(srgb_decode_value(x));
            prop_assert!((rt - x).abs() < 1e-6);
            let rt2 = srgb_decode_value(srgb_encode_value(x));
            prop_assert!((rt2 - x).abs() < 1e-6);
        }

        #[test]
        fn prop_bilinear_within_neighbor_hull(
            vals in proptest::collection::vec(0.0f64..=1.0, 9),
            x in -1.0f64..4.0,
            y in -1.0f64..4.0,
        ) {
            let img = Raster::from_vec(3, 3, 1, ColorTag::Gray, vals).unwrap();
            let s = img.sample_bilinear_ch(x, y, 0);
            let lo = img.min_value() - 1e-12;
            let hi = img.max_value() + 1e-12;
            prop_assert!(s >= lo && s <= hi);
        }
    }
}
