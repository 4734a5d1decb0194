//! Monte Carlo light transport through the sensor cross-section.

mod camera;
mod contact;
mod render;
mod scene;
mod sweep;
mod trace;

pub use contact::{ContactInterval, ContactSpec, Rgb};
pub use render::{calibrate_exposure, render, render_profile, ContactLayout, NoiseModel, RenderSettings, EXPOSURE_PEAK_GRAY};
pub use scene::{Scene2D, SceneFile, Sources, Surface, SurfaceKind};
pub use sweep::{leakage_sweep, sweep_csv, sweep_scene, SweepRow, SweepVariable};
pub use trace::{trace, CameraProfile, Ray2D, RaySeed, BOUNCE_CAP};

use crate::optics::OpticsError;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid contact: {0}")]
    InvalidContact(String),
    #[error("ray count must be at least 1")]
    ZeroRays,
    #[error("pixel count must be at least 1")]
    ZeroPixels,
    #[error("image dimensions must be non-zero")]
    ZeroDimensions,
    #[error("profiles differ in pixel count ({0} vs {1})")]
    ProfileMismatch(usize, usize),
    #[error("sweep needs at least two values")]
    TooFewValues,
    #[error("sweep value {0} is invalid for {1}")]
    InvalidSweepValue(f64, &'static str),
    #[error(transparent)]
    Optics(#[from] OpticsError),
}
