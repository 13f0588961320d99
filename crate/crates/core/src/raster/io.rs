//! File I/O: 8/16-bit PNG rasters and depth maps (16-bit grayscale PNG or
//! PFM). Color files load as sRGB-tagged rasters; grayscale files load as
//! `Gray`. Depth is normalized to `[0, 1]` by the container's max value;
//! PFM data is taken as already normalized and clamped.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::raster::{ColorTag, DepthMap, Raster};

/// Loads an 8- or 16-bit PNG (or any format the codec recognizes) into a
/// raster. Alpha channels are dropped; color data is tagged `Srgb`.
pub fn load_png(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let img = image::open(path)?;
    let (gray, sixteen) = match &img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => (true, false),
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => (true, true),
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => (false, true),
        _ => (false, false),
    };
    let (width, height) = (img.width() as usize, img.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::malformed(path, "image has zero dimensions"));
    }
    let raster = if gray {
        let data: Vec<f64> = if sixteen {
            img.to_luma16()
                .pixels()
                .map(|p| p.0[0] as f64 / 65535.0)
                .collect()
        } else {
            img.to_luma8()
                .pixels()
                .map(|p| p.0[0] as f64 / 255.0)
                .collect()
        };
        Raster::from_vec(width, height, 1, ColorTag::Gray, data)?
    } else {
        let data: Vec<f64> = if sixteen {
            img.to_rgb16()
                .pixels()
                .flat_map(|p| p.0.map(|v| v as f64 / 65535.0))
                .collect()
        } else {
            img.to_rgb8()
                .pixels()
                .flat_map(|p| p.0.map(|v| v as f64 / 255.0))
                .collect()
        };
        Raster::from_vec(width, height, 3, ColorTag::Srgb, data)?
    };
    Ok(raster)
}

fn quantize<const MAX: u32>(v: f64) -> u32 {
    (v.clamp(0.0, 1.0) * MAX as f64).round() as u32
}

fn check_encoded(img: &Raster) -> Result<()> {
    // Refuse to quantize linear-light samples; callers encode first.
    if img.color_tag() == ColorTag::LinearRgb {
        return Err(Error::TagMismatch {
            expected: "srgb or gray",
            found: img.color_tag().name(),
        });
    }
    Ok(())
}

/// Saves a raster as an 8-bit PNG (grayscale or RGB by channel count).
pub fn save_png(path: impl AsRef<Path>, img: &Raster) -> Result<()> {
    check_encoded(img)?;
    let (w, h) = (img.width() as u32, img.height() as u32);
    if img.channels() == 1 {
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_fn(w, h, |x, y| {
            Luma([quantize::<255>(img.get(x as usize, y as usize, 0)) as u8])
        });
        buf.save(path.as_ref())?;
    } else {
        let buf: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_fn(w, h, |x, y| {
            let p = img.pixel(x as usize, y as usize);
            Rgb([
                quantize::<255>(p[0]) as u8,
                quantize::<255>(p[1]) as u8,
                quantize::<255>(p[2]) as u8,
            ])
        });
        buf.save(path.as_ref())?;
    }
    Ok(())
}

/// Saves a raster as a 16-bit PNG; used for depth and density dumps where
/// 8 bits would band.
pub fn save_png16(path: impl AsRef<Path>, img: &Raster) -> Result<()> {
    check_encoded(img)?;
    let (w, h) = (img.width() as u32, img.height() as u32);
    if img.channels() == 1 {
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(w, h, |x, y| {
            Luma([quantize::<65535>(img.get(x as usize, y as usize, 0)) as u16])
        });
        buf.save(path.as_ref())?;
    } else {
        let buf: ImageBuffer<Rgb<u16>, Vec<u16>> = ImageBuffer::from_fn(w, h, |x, y| {
            let p = img.pixel(x as usize, y as usize);
            Rgb([
                quantize::<65535>(p[0]) as u16,
                quantize::<65535>(p[1]) as u16,
                quantize::<65535>(p[2]) as u16,
            ])
        });
        buf.save(path.as_ref())?;
    }
    Ok(())
}

/// Loads a depth map from a 16-bit (or 8-bit) grayscale PNG or a PFM file,
/// normalized to `[0, 1]` with 1 = farthest.
pub fn load_depth(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    let is_pfm = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("pfm"))
        .unwrap_or(false);
    if is_pfm {
        return load_pfm(path);
    }
    let img = image::open(path)?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let values: Vec<f64> = match img {
        DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        other => {
            return Err(Error::malformed(
                path,
                format!(
                    "depth must be single-channel 8/16-bit grayscale, got {:?}",
                    other.color()
                ),
            ))
        }
    };
    DepthMap::from_values(width, height, values)
}

/// PFM: "Pf" magic (grayscale), ASCII width/height/scale header, then raw
/// 32-bit floats, rows stored bottom-to-top. A negative scale means
/// little-endian data per the de-facto convention; the magnitude is ignored
/// because depth is taken as already normalized (then clamped).
fn load_pfm(path: &Path) -> Result<DepthMap> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;

    let mut token = |bytes: &[u8]| -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::malformed(path, "truncated PFM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token(&bytes)?;
    match magic.as_str() {
        "Pf" => {}
        "PF" => {
            return Err(Error::malformed(
                path,
                "color PFM not supported for depth; expected grayscale \"Pf\"",
            ))
        }
        other => {
            return Err(Error::malformed(
                path,
                format!("not a PFM file (magic {other:?})"),
            ))
        }
    }
    let width: usize = token(&bytes)?
        .parse()
        .map_err(|_| Error::malformed(path, "bad PFM width"))?;
    let height: usize = token(&bytes)?
        .parse()
        .map_err(|_| Error::malformed(path, "bad PFM height"))?;
    let scale: f64 = token(&bytes)?
        .parse()
        .map_err(|_| Error::malformed(path, "bad PFM scale"))?;
    if width == 0 || height == 0 {
        return Err(Error::malformed(path, "PFM has zero dimensions"));
    }
    // Exactly one whitespace byte separates the header from the data.
    pos += 1;
    let need = width * height * 4;
    if bytes.len() < pos + need {
        return Err(Error::malformed(
            path,
            format!(
                "PFM data truncated: need {need} bytes, have {}",
                bytes.len().saturating_sub(pos)
            ),
        ));
    }
    let little_endian = scale < 0.0;
    let mut values = vec![0.0f64; width * height];
    for row in 0..height {
        // PFM rows run bottom-to-top.
        let dst_y = height - 1 - row;
        for x in 0..width {
            let off = pos + (row * width + x) * 4;
            let raw: [u8; 4] = bytes[off..off + 4].try_into().unwrap();
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            if !v.is_finite() {
                return Err(Error::malformed(path, "non-finite PFM sample"));
            }
            values[dst_y * width + x] = (v as f64).clamp(0.0, 1.0);
        }
    }
    DepthMap::from_values(width, height, values)
}
