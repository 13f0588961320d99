//! Atmospheric rendering: composes haze, fog, or smoke onto a clean image
//! given a depth map and a physical parameter set.
//!
//! The model is single-scattering with a multiple-scattering brightness
//! boost. Per channel `c`, with transmittance `T_c = exp(-tau_c)`:
//!
//! ```text
//! out_c = clean_c * T_c + A_c * (w0_c * kappa) * (1 - T_c)^eta
//! tau_c = (beta0_c * M(x)) * exp(-h(x) / H) * d(x) + tau_base
//! ```
//!
//! The exponent `eta` in (0, 1] acts on the whole in-scatter factor, so a
//! lower `eta` brightens the veil — a compact stand-in for multiple
//! scattering in dense media. At `eta = 1` the model reduces to plain
//! single scattering.
//!
//! where `beta0 = 3.912 / V` ties extinction to meteorological visibility
//! (Koschmieder relation), `h(x)` is a screen-space height proxy, `d(x)` is
//! metric distance from the normalized depth map, and `M(x)` is an optional
//! density modulator making the medium non-homogeneous. All compositing
//! happens in linear RGB; inputs and outputs are encoded sRGB.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedural::DensityField;
use crate::raster::{self, ColorTag, DepthMap, Raster};

/// Koschmieder constant relating meteorological visibility to extinction
/// at a 2% contrast threshold: `beta0 = 3.912 / V`.
pub const KOSCHMIEDER_CONSTANT: f64 = 3.912;

/// Per-meter extinction coefficient from visibility in meters.
pub fn extinction_from_visibility(visibility_m: f64) -> Result<f64> {
    if visibility_m.is_nan() || visibility_m <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "visibility must be positive, got {visibility_m}"
        )));
    }
    Ok(KOSCHMIEDER_CONSTANT / visibility_m)
}

/// Screen-space height proxy: the top image row (`y_norm = 0`) maps to
/// `h_max`, the bottom row (`y_norm = 1`) to ground level.
pub fn height_proxy(y_norm: f64, h_max_m: f64) -> f64 {
    h_max_m * (1.0 - y_norm)
}

/// Optical depth along one pixel's ray. `tau_base` is an additive floor
/// applied after density modulation.
pub fn optical_depth(
    beta0: f64,
    density: f64,
    height_m: f64,
    scale_height_m: f64,
    distance_m: f64,
    tau_base: f64,
) -> f64 {
    (beta0 * density) * (-height_m / scale_height_m).exp() * distance_m + tau_base
}

/// Beer–Lambert transmittance.
pub fn transmittance(tau: f64) -> f64 {
    (-tau).exp()
}

/// Full physical parameter set for one render.
///
/// Airlight is carried in 0–255 sRGB as presets specify it, and decoded to
/// linear on use. `chromatic_visibility_m`, when set, gives per-channel
/// visibilities for wavelength-dependent extinction; otherwise `beta0` is
/// achromatic and color enters only through airlight and albedo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtmosphereParams {
    pub visibility_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chromatic_visibility_m: Option<[f64; 3]>,
    pub airlight_srgb: [f64; 3],
    pub albedo: [f64; 3],
    pub kappa: f64,
    pub eta: f64,
    pub scale_height_m: f64,
    pub h_max_m: f64,
    pub d_max_m: f64,
    pub tau_base: f64,
}

impl AtmosphereParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "atmosphere params: {what} (got {self:?})"
                )))
            }
        };
        check(self.visibility_m > 0.0, "visibility_m must be > 0")?;
        if let Some(v) = self.chromatic_visibility_m {
            check(
                v.iter().all(|&x| x > 0.0),
                "chromatic visibilities must be > 0",
            )?;
        }
        check(
            self.airlight_srgb
                .iter()
                .all(|&a| (0.0..=255.0).contains(&a)),
            "airlight_srgb components must lie in [0, 255]",
        )?;
        check(
            self.albedo.iter().all(|&w| (0.0..=1.0).contains(&w)),
            "albedo components must lie in [0, 1]",
        )?;
        check(self.kappa >= 0.0, "kappa must be >= 0")?;
        check(self.eta > 0.0 && self.eta <= 1.0, "eta must lie in (0, 1]")?;
        check(self.scale_height_m > 0.0, "scale_height_m must be > 0")?;
        check(self.h_max_m >= 0.0, "h_max_m must be >= 0")?;
        check(self.d_max_m > 0.0, "d_max_m must be > 0")?;
        check(self.tau_base >= 0.0, "tau_base must be >= 0")?;
        Ok(())
    }

    /// Airlight decoded to linear light, components in `[0, 1]`.
    pub fn airlight_linear(&self) -> [f64; 3] {
        self.airlight_srgb
            .map(|a| raster::srgb_decode_value(a / 255.0))
    }

    /// Per-channel base extinction, from the chromatic override when present.
    pub fn beta0(&self) -> Result<[f64; 3]> {
        match self.chromatic_visibility_m {
            Some(vs) => Ok([
                extinction_from_visibility(vs[0])?,
                extinction_from_visibility(vs[1])?,
                extinction_from_visibility(vs[2])?,
            ]),
            None => {
                let b = extinction_from_visibility(self.visibility_m)?;
                Ok([b, b, b])
            }
        }
    }
}

/// Blends attenuated scene radiance with in-scattered airlight, per channel,
/// then clamps into `[0, 1]`. `clean` must be linear RGB; `transmit` holds
/// per-pixel per-channel transmittance in `(0, 1]`.
pub fn compose(clean: &Raster, transmit: &Raster, p: &AtmosphereParams) -> Result<Raster> {
    if clean.color_tag() != ColorTag::LinearRgb {
        return Err(Error::TagMismatch {
            expected: ColorTag::LinearRgb.name(),
            found: clean.color_tag().name(),
        });
    }
    if clean.channels() != 3 {
        return Err(Error::Shape("compose expects a 3-channel image".into()));
    }
    if !clean.same_shape(transmit) {
        return Err(Error::Shape(format!(
            "transmittance {}x{}x{} does not match image {}x{}x{}",
            transmit.width(),
            transmit.height(),
            transmit.channels(),
            clean.width(),
            clean.height(),
            clean.channels()
        )));
    }
    let a = p.airlight_linear();
    let gain = [
        p.albedo[0] * p.kappa,
        p.albedo[1] * p.kappa,
        p.albedo[2] * p.kappa,
    ];
    let mut out = Raster::new(clean.width(), clean.height(), 3, ColorTag::LinearRgb);
    for y in 0..clean.height() {
        for x in 0..clean.width() {
            for c in 0..3 {
                let t = transmit.get(x, y, c);
                let veil = if p.eta == 1.0 {
                    1.0 - t
                } else {
                    (1.0 - t).powf(p.eta)
                };
                let v = clean.get(x, y, c) * t + a[c] * gain[c] * veil;
                out.set(x, y, c, v.clamp(0.0, 1.0));
            }
        }
    }
    Ok(out)
}

/// Per-pixel per-channel transmittance field for a scene.
pub fn transmittance_field(
    width: usize,
    height: usize,
    depth: &DepthMap,
    p: &AtmosphereParams,
    density: Option<&DensityField>,
) -> Result<Raster> {
    let beta0 = p.beta0()?;
    let mut t = Raster::new(width, height, 3, ColorTag::LinearRgb);
    for y in 0..height {
        // Single-row images take the midpoint; otherwise rows span [0, 1].
        let y_norm = if height > 1 {
            y as f64 / (height - 1) as f64
        } else {
            0.5
        };
        let h = height_proxy(y_norm, p.h_max_m);
        let falloff = (-h / p.scale_height_m).exp();
        for x in 0..width {
            let d = depth.get(x, y) * p.d_max_m;
            let m = density.map_or(1.0, |f| f.get(x, y));
            for (c, &b) in beta0.iter().enumerate() {
                let tau = (b * m) * falloff * d + p.tau_base;
                t.set(x, y, c, transmittance(tau));
            }
        }
    }
    Ok(t)
}

/// Renders an atmospheric effect onto an encoded-sRGB image:
/// decode → optical depth → transmittance → compose → clamp → encode.
/// Fully deterministic given its inputs.
pub fn render(
    clean: &Raster,
    depth: &DepthMap,
    p: &AtmosphereParams,
    density: Option<&DensityField>,
) -> Result<Raster> {
    p.validate()?;
    if clean.channels() != 3 {
        return Err(Error::Shape("render expects a 3-channel image".into()));
    }
    if depth.width() != clean.width() || depth.height() != clean.height() {
        return Err(Error::Shape(format!(
            "depth {}x{} does not match image {}x{}",
            depth.width(),
            depth.height(),
            clean.width(),
            clean.height()
        )));
    }
    if let Some(f) = density {
        if f.width() != clean.width() || f.height() != clean.height() {
            return Err(Error::Shape(format!(
                "density field {}x{} does not match image {}x{}",
                f.width(),
                f.height(),
                clean.width(),
                clean.height()
            )));
        }
    }
    let lin = raster::srgb_decode(clean)?;
    let t = transmittance_field(clean.width(), clean.height(), depth, p, density)?;
    let composed = compose(&lin, &t, p)?;
    raster::srgb_encode(&composed)
}

/// Medium family a preset renders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetKind {
    Haze,
    Fog,
    Smoke,
}

impl PresetKind {
    pub fn name(self) -> &'static str {
        match self {
            PresetKind::Haze => "haze",
            PresetKind::Fog => "fog",
            PresetKind::Smoke => "smoke",
        }
    }
}

impl std::fmt::Display for PresetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Ranges for randomized parameter draws. All two-element arrays are
/// `[lo, hi]` closed intervals; degenerate ranges pin the value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RenderPreset {
    pub kind: PresetKind,
    pub visibility_m: [f64; 2],
    /// Candidate airlight colors in 0–255 sRGB; one is picked per draw.
    pub airlight_palette: Vec<[f64; 3]>,
    /// Single-scattering albedo, drawn as one scalar and replicated.
    pub albedo: [f64; 2],
    pub eta: [f64; 2],
    pub scale_height_m: [f64; 2],
    /// Probability of drawing the scale height from
    /// `ground_scale_height_m` instead, confining the medium near the
    /// ground (e.g. ground fog).
    #[serde(default)]
    pub ground_layer_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_scale_height_m: Option<[f64; 2]>,
    pub h_max_m: [f64; 2],
    pub d_max_m: [f64; 2],
    pub tau_base: [f64; 2],
}

fn draw(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

impl RenderPreset {
    /// Draws one concrete parameter set. The draw order is fixed, so a seed
    /// identifies the parameters regardless of call site.
    pub fn draw_params(&self, seed: u64) -> AtmosphereParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let visibility_m = draw(&mut rng, self.visibility_m);
        let airlight_srgb = self.airlight_palette[rng.random_range(0..self.airlight_palette.len())];
        let w0 = draw(&mut rng, self.albedo);
        let eta = draw(&mut rng, self.eta);
        let ground =
            self.ground_scale_height_m.is_some() && rng.random::<f64>() < self.ground_layer_p;
        let scale_height_m = if ground {
            draw(&mut rng, self.ground_scale_height_m.unwrap())
        } else {
            draw(&mut rng, self.scale_height_m)
        };
        let h_max_m = draw(&mut rng, self.h_max_m);
        let d_max_m = draw(&mut rng, self.d_max_m);
        let tau_base = draw(&mut rng, self.tau_base);
        AtmosphereParams {
            visibility_m,
            chromatic_visibility_m: None,
            airlight_srgb,
            albedo: [w0, w0, w0],
            kappa: 1.0,
            eta,
            scale_height_m,
            h_max_m,
            d_max_m,
            tau_base,
        }
    }

    /// Daytime haze: long visibility, bright slightly tinted airlight,
    /// nearly pure scattering, weak height dependence.
    pub fn haze() -> Self {
        RenderPreset {
            kind: PresetKind::Haze,
            visibility_m: [100.0, 1000.0],
            airlight_palette: vec![
                [153.0, 174.0, 215.0],
                [200.0, 180.0, 140.0],
                [210.0, 210.0, 220.0],
            ],
            albedo: [0.9, 1.0],
            eta: [0.8, 1.0],
            scale_height_m: [200.0, 1000.0],
            ground_layer_p: 0.0,
            ground_scale_height_m: None,
            h_max_m: [0.0, 100.0],
            d_max_m: [200.0, 2000.0],
            tau_base: [0.0, 0.5],
        }
    }

    /// Fog: short visibility, white veil, pure scattering, strong veil
    /// boost, and a 50% chance of a ground-hugging layer.
    pub fn fog() -> Self {
        RenderPreset {
            kind: PresetKind::Fog,
            visibility_m: [30.0, 1000.0],
            airlight_palette: vec![
                [220.0, 220.0, 225.0],
                [200.0, 200.0, 205.0],
                [240.0, 240.0, 240.0],
            ],
            albedo: [1.0, 1.0],
            eta: [0.5, 1.0],
            scale_height_m: [100.0, 400.0],
            ground_layer_p: 0.5,
            ground_scale_height_m: Some([30.0, 60.0]),
            h_max_m: [50.0, 150.0],
            d_max_m: [100.0, 1000.0],
            tau_base: [0.0, 0.5],
        }
    }

    /// Smoke: absorbing medium (albedo < 1), warm gray-brown veil, low
    /// scale height so plumes hug the ground.
    pub fn smoke() -> Self {
        RenderPreset {
            kind: PresetKind::Smoke,
            visibility_m: [50.0, 500.0],
            airlight_palette: vec![[180.0, 150.0, 120.0], [160.0, 120.0, 90.0]],
            albedo: [0.75, 0.85],
            eta: [0.6, 1.0],
            scale_height_m: [40.0, 50.0],
            ground_layer_p: 0.0,
            ground_scale_height_m: None,
            h_max_m: [40.0, 120.0],
            d_max_m: [100.0, 800.0],
            tau_base: [0.0, 0.5],
        }
    }

    pub fn builtin() -> Vec<RenderPreset> {
        vec![Self::haze(), Self::fog(), Self::smoke()]
    }

    pub fn by_name(name: &str) -> Option<RenderPreset> {
        match name.to_ascii_lowercase().as_str() {
            "haze" => Some(Self::haze()),
            "fog" => Some(Self::fog()),
            "smoke" => Some(Self::smoke()),
            _ => None,
        }
    }
}
