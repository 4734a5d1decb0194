//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain numbers and returns JSON text or pixel buffers,
//! so the same functions run natively under `cargo test`.

use serde::Serialize;
use wasm_bindgen::prelude::*;
use wedgesense::imaging::ContactMask;
use wedgesense::optics::{full_report, Absorptivity, OpticalConfig};
use wedgesense::phototrace::{
    calibrate_exposure, leakage_sweep, render, ContactLayout, ContactSpec, NoiseModel, RenderSettings, Scene2D, Sources,
    SweepVariable,
};
use wedgesense::segmentation::{build_reference, denoise, segment, stats, Thresholds, DEFAULT_MIN_COMPONENT};

const WIDTH: usize = 64;
const HEIGHT: usize = 32;
const REFERENCE_FRAMES: usize = 10;

#[derive(Serialize)]
struct Condition {
    satisfied: bool,
    margin_deg: f64,
}

#[derive(Serialize)]
struct Report {
    critical_angle_deg: f64,
    external_rejection: Condition,
    internal_rejection: Condition,
    contact_transmission: Condition,
    direct_view: bool,
    all_pass: bool,
}

fn config(theta_tv_deg: f64, theta_s_deg: f64, led_half_angle_deg: f64) -> OpticalConfig {
    let mut c = OpticalConfig {
        theta_tv: theta_tv_deg.to_radians(),
        theta_s: theta_s_deg.to_radians(),
        absorptivity: Absorptivity::REALISTIC,
        ..OpticalConfig::default()
    };
    c.led.half_angle = led_half_angle_deg.to_radians();
    c
}

fn scene(theta_s_deg: f64) -> Result<Scene2D, String> {
    let c = config(90.0, theta_s_deg, OpticalConfig::default().led.half_angle.to_degrees());
    Scene2D::from_config(c, Sources::default()).map_err(|e| e.to_string())
}

/// Design conditions for a wedge angle, shell angle and LED cone, as JSON.
#[wasm_bindgen]
pub fn design_check(theta_tv_deg: f64, theta_s_deg: f64, led_half_angle_deg: f64) -> Result<String, String> {
    let c = config(theta_tv_deg, theta_s_deg, led_half_angle_deg);
    c.media.validate().map_err(|e| e.to_string())?;
    let r = full_report(&c);
    let cond = |satisfied: bool, margin: f64| Condition {
        satisfied,
        margin_deg: margin.to_degrees(),
    };
    let report = Report {
        critical_angle_deg: r.critical_angle.to_degrees(),
        external_rejection: cond(r.external_rejection.satisfied, r.external_rejection.margin),
        internal_rejection: cond(r.internal_rejection.check.satisfied, r.internal_rejection.check.margin),
        contact_transmission: cond(r.contact_transmission.check.satisfied, r.contact_transmission.check.margin),
        direct_view: r.internal_rejection.direct_view,
        all_pass: r.all_pass(),
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// A rendered frame with its segmentation.
#[wasm_bindgen]
pub struct Frame {
    width: usize,
    height: usize,
    rgba: Vec<u8>,
    mask_rgba: Vec<u8>,
    coverage: f64,
    truth_coverage: f64,
    iou: f64,
}

#[wasm_bindgen]
impl Frame {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Raw frame as RGBA bytes.
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    /// Mask overlay: white where contact was segmented.
    pub fn mask_rgba(&self) -> Vec<u8> {
        self.mask_rgba.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    #[wasm_bindgen(getter)]
    pub fn truth_coverage(&self) -> f64 {
        self.truth_coverage
    }

    #[wasm_bindgen(getter)]
    pub fn iou(&self) -> f64 {
        self.iou
    }
}

fn mask_pixels(mask: &ContactMask) -> Vec<u8> {
    mask.bits()
        .iter()
        .flat_map(|&b| if b { [255, 255, 255, 255] } else { [0, 0, 0, 255] })
        .collect()
}

/// Render a contact band from `start_mm` to `end_mm` over the middle half of
/// the rows, then segment it against a freshly built reference.
#[wasm_bindgen]
pub fn render_contact(theta_s_deg: f64, start_mm: f64, end_mm: f64, albedo: f64, seed: u64, rays: u32) -> Result<Frame, String> {
    let s = scene(theta_s_deg)?;
    let length = s.touching_length();
    let albedo = albedo.clamp(0.0, 1.0);
    let exposure = calibrate_exposure(&s, seed, 100_000, WIDTH).map_err(|e| e.to_string())?;
    let settings = RenderSettings {
        seed,
        rays: rays.max(1) as u64,
        width: WIDTH,
        height: HEIGHT,
        exposure_scale: exposure,
        noise: NoiseModel::default(),
    };
    let none = ContactLayout::Uniform(ContactSpec::none());
    let refs = (0..REFERENCE_FRAMES as u64)
        .map(|i| {
            render(
                &s,
                &none,
                &RenderSettings {
                    seed: seed.wrapping_add(i),
                    ..settings
                },
            )
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let reference = build_reference(&refs, REFERENCE_FRAMES).map_err(|e| e.to_string())?;

    let band = ContactSpec::single(start_mm.max(0.0), end_mm.min(length), [albedo; 3]);
    let layout = if band.intervals[0].start_mm < band.intervals[0].end_mm {
        ContactLayout::Rows(
            (0..HEIGHT)
                .map(|y| {
                    if (HEIGHT / 4..3 * HEIGHT / 4).contains(&y) {
                        band.clone()
                    } else {
                        ContactSpec::none()
                    }
                })
                .collect(),
        )
    } else {
        none
    };
    let frame = render(
        &s,
        &layout,
        &RenderSettings {
            seed: seed.wrapping_add(REFERENCE_FRAMES as u64),
            ..settings
        },
    )
    .map_err(|e| e.to_string())?;
    let mask = denoise(
        &segment(&frame, &reference, &Thresholds::default()).map_err(|e| e.to_string())?,
        DEFAULT_MIN_COMPONENT,
    );
    let truth = layout.ground_truth(WIDTH, HEIGHT, length).map_err(|e| e.to_string())?;
    let n = (WIDTH * HEIGHT) as f64;
    Ok(Frame {
        width: WIDTH,
        height: HEIGHT,
        rgba: frame.as_raw().chunks(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect(),
        mask_rgba: mask_pixels(&mask),
        coverage: stats(&mask).coverage,
        truth_coverage: truth.count() as f64 / n,
        iou: mask.iou(&truth).map_err(|e| e.to_string())?,
    })
}

#[derive(Serialize)]
struct SweepPoint {
    theta_s_deg: f64,
    leakage_gray: f64,
}

/// No-contact leakage against shell angle with 0.95 absorbers, as JSON.
#[wasm_bindgen]
pub fn shell_sweep(from_deg: f64, to_deg: f64, points: u32, rays: u32) -> Result<String, String> {
    if points < 2 {
        return Err("a sweep needs at least two points".into());
    }
    let s = scene(90.0)?;
    let exposure = calibrate_exposure(&s, 1, 100_000, WIDTH).map_err(|e| e.to_string())?;
    let step = (to_deg - from_deg) / (points - 1) as f64;
    let angles: Vec<f64> = (0..points).map(|k| (from_deg + k as f64 * step).to_radians()).collect();
    let rows = leakage_sweep(&s, SweepVariable::ThetaS, &angles, 1, rays.max(1) as u64, WIDTH).map_err(|e| e.to_string())?;
    let out: Vec<SweepPoint> = rows
        .iter()
        .map(|r| SweepPoint {
            theta_s_deg: r.value.to_degrees(),
            leakage_gray: r.mean * exposure,
        })
        .collect();
    serde_json::to_string(&out).map_err(|e| e.to_string())
}
