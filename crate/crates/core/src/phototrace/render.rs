//! Synthetic raw frames: 1D camera profiles extruded along the sensor depth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::contact::{ContactSpec, Rgb};
use super::trace::{trace, CameraProfile};
use super::{Scene2D, TraceError};
use crate::imaging::{ContactMask, SensorImage};

/// Target gray level of a full white contact under the calibrated exposure.
pub const EXPOSURE_PEAK_GRAY: f64 = 200.0;
const NOISE_STREAM_SALT: u64 = 0x6e6f_6973_655f_7331;

/// Per-pixel zero-mean Gaussian sensor noise in gray levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel { sigma: 0.0 };
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { sigma: 0.8 }
    }
}

/// Contact state over the whole frame.
#[derive(Debug, Clone, PartialEq)]
pub enum ContactLayout {
    /// The same cross-section on every image row.
    Uniform(ContactSpec),
    /// One cross-section per image row, top to bottom.
    Rows(Vec<ContactSpec>),
}

impl ContactLayout {
    /// Rows from a column mask whose width is the render width.
    pub fn from_mask(mask: &ContactMask, touching_length: f64, albedo: Rgb) -> Self {
        Self::Rows(
            (0..mask.height())
                .map(|y| ContactSpec::from_columns(mask.row(y), touching_length, albedo))
                .collect(),
        )
    }

    fn row(&self, y: usize) -> &ContactSpec {
        match self {
            Self::Uniform(c) => c,
            Self::Rows(r) => &r[y],
        }
    }

    /// Pixels whose column footprint overlaps contact.
    pub fn ground_truth(&self, width: usize, height: usize, touching_length: f64) -> Result<ContactMask, TraceError> {
        self.check_rows(height)?;
        let rows: Vec<Vec<bool>> = (0..height)
            .map(|y| self.row(y).column_support(touching_length, width))
            .collect();
        ContactMask::from_fn(width, height, |x, y| rows[y][x]).map_err(|_| TraceError::ZeroDimensions)
    }

    fn check_rows(&self, height: usize) -> Result<(), TraceError> {
        match self {
            Self::Rows(r) if r.len() != height => Err(TraceError::InvalidContact(format!(
                "layout has {} rows, image has {height}",
                r.len()
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub seed: u64,
    /// Rays per distinct cross-section.
    pub rays: u64,
    pub width: usize,
    pub height: usize,
    /// Gray levels per unit radiance.
    pub exposure_scale: f64,
    pub noise: NoiseModel,
}

/// Exposure that maps the brightest column of a full-width white contact to
/// gray 200.
pub fn calibrate_exposure(scene: &Scene2D, seed: u64, rays: u64, pixels: usize) -> Result<f64, TraceError> {
    let full = ContactSpec::single(0.0, scene.touching_length(), [1.0; 3]);
    let prof = trace(scene, &full, seed, rays, pixels)?;
    let peak = prof
        .samples()
        .iter()
        .flat_map(|c| c.iter().copied())
        .fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(TraceError::InvalidScene("white contact produced no camera signal".into()));
    }
    Ok(EXPOSURE_PEAK_GRAY / peak)
}

/// Render a frame; identical row cross-sections are traced once.
pub fn render(scene: &Scene2D, layout: &ContactLayout, settings: &RenderSettings) -> Result<SensorImage, TraceError> {
    let (w, h) = (settings.width, settings.height);
    if w == 0 || h == 0 {
        return Err(TraceError::ZeroDimensions);
    }
    layout.check_rows(h)?;
    let mut unique: Vec<&ContactSpec> = Vec::new();
    let mut row_profile = Vec::with_capacity(h);
    for y in 0..h {
        let spec = layout.row(y);
        let k = match unique.iter().position(|u| *u == spec) {
            Some(k) => k,
            None => {
                unique.push(spec);
                unique.len() - 1
            }
        };
        row_profile.push(k);
    }
    let profiles = unique
        .iter()
        .map(|spec| trace(scene, spec, settings.seed, settings.rays, w))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<&CameraProfile> = row_profile.iter().map(|&k| &profiles[k]).collect();
    Ok(expose(&rows, w, h, settings))
}

/// Extrude one profile to `height` identical rows.
pub fn render_profile(profile: &CameraProfile, height: usize, settings: &RenderSettings) -> Result<SensorImage, TraceError> {
    if height == 0 || profile.pixel_count() == 0 {
        return Err(TraceError::ZeroDimensions);
    }
    let rows = vec![profile; height];
    Ok(expose(&rows, profile.pixel_count(), height, settings))
}

fn expose(rows: &[&CameraProfile], w: usize, h: usize, settings: &RenderSettings) -> SensorImage {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ NOISE_STREAM_SALT);
    let normal = (settings.noise.sigma > 0.0).then(|| Normal::new(0.0, settings.noise.sigma).expect("finite sigma"));
    let columns: Vec<Vec<Rgb>> = rows.iter().map(|p| p.samples()).collect();
    SensorImage::from_fn(w, h, |x, y| {
        let rad = columns[y][x];
        let mut px = [0u8; 3];
        for k in 0..3 {
            let mut g = rad[k] * settings.exposure_scale;
            if let Some(n) = &normal {
                g += n.sample(&mut rng);
            }
            px[k] = g.round().clamp(0.0, 255.0) as u8;
        }
        px
    })
    .expect("dimensions checked")
}
