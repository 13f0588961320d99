//! Deterministic fixtures shared by the benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softfx_core::{ColorTag, DepthMap, Raster};

/// Random encoded-sRGB image.
pub fn srgb_image(width: usize, height: usize, seed: u64) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height * 3).map(|_| rng.random()).collect();
    Raster::from_vec(width, height, 3, ColorTag::Srgb, data).expect("fixture image")
}

/// Depth ramp: near at the bottom-left, far at the top-right.
pub fn ramp_depth(width: usize, height: usize) -> DepthMap {
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            values.push((x + y) as f64 / (width + height - 2).max(1) as f64);
        }
    }
    DepthMap::from_values(width, height, values).expect("fixture depth")
}
