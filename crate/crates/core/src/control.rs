//! Simulated contact-driven control loops: coverage-regulated spreading,
//! approach-and-stop dipping, thin-film following and grasp-until-contact.
//!
//! The loops run in lock step with one observation per control step. An
//! observation comes either straight from the world's ground-truth contact
//! ([`GroundTruth`]) or from rendering, segmenting and measuring a synthetic
//! frame ([`RenderedSensing`]).

use serde::{Deserialize, Serialize};

use crate::imaging::ContactMask;
use crate::phototrace::{render, ContactInterval, ContactLayout, ContactSpec, RenderSettings, Rgb, Scene2D, TraceError};
use crate::segmentation::{build_reference, segment, ReferenceState, SegmentationError, Thresholds};

#[derive(Debug, thiserror::Error)]
pub enum ControlError {
    #[error("{axis} = {value:.3} mm left the workspace [{min}, {max}]")]
    WorkspaceBound {
        axis: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("surface not reached within the {limit} mm travel limit")]
    TravelLimit { limit: f64 },
    #[error("grasp failed: gripper closed without reaching the contact threshold")]
    GraspFailed,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediumType {
    Liquid,
    Semiliquid,
    Film,
    Rigid,
}

/// Surface heights over a lateral workspace, sampled at a fixed spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactWorld {
    pub medium: MediumType,
    #[serde(rename = "x_min_mm")]
    pub x_min: f64,
    #[serde(rename = "spacing_mm")]
    pub spacing: f64,
    /// Empty means there is no surface at all.
    #[serde(rename = "heights_mm")]
    pub heights: Vec<f64>,
    /// Penetration giving full coverage for liquid and semiliquid media.
    #[serde(rename = "wet_depth_mm", default = "default_wet_depth")]
    pub wet_depth: f64,
    /// Fraction of the local penetration a contacting pass removes.
    #[serde(default)]
    pub spread_rate: f64,
    /// Lowest height spreading can thin the medium to.
    #[serde(rename = "floor_mm", default)]
    pub floor: f64,
    #[serde(default = "default_albedo")]
    pub albedo: Rgb,
}

fn default_wet_depth() -> f64 {
    2.0
}

fn default_albedo() -> Rgb {
    [0.9; 3]
}

impl ContactWorld {
    pub fn flat(medium: MediumType, x_min: f64, x_max: f64, height: f64) -> Self {
        let spacing = 0.1;
        let n = ((x_max - x_min) / spacing).round() as usize + 1;
        Self {
            medium,
            x_min,
            spacing,
            heights: vec![height; n],
            wet_depth: default_wet_depth(),
            spread_rate: 0.0,
            floor: 0.0,
            albedo: default_albedo(),
        }
    }

    /// Flat water layer 3 mm deep over a 100 mm tray that thins where swept.
    pub fn default_liquid() -> Self {
        Self {
            spread_rate: 0.01,
            ..Self::flat(MediumType::Liquid, -50.0, 50.0, 3.0)
        }
    }

    pub fn empty(medium: MediumType) -> Self {
        Self {
            heights: Vec::new(),
            ..Self::flat(medium, 0.0, 0.0, 0.0)
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: &str| Err(ControlError::InvalidParameter(m.into()));
        if !(self.spacing > 0.0) {
            return bad("world spacing must be positive");
        }
        if !(self.wet_depth > 0.0) {
            return bad("wet depth must be positive");
        }
        if !(0.0..=1.0).contains(&self.spread_rate) {
            return bad("spread rate must lie in [0, 1]");
        }
        if self.heights.iter().any(|h| !h.is_finite()) || !self.x_min.is_finite() {
            return bad("heights must be finite");
        }
        if self.albedo.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad("albedo must lie in [0, 1]");
        }
        Ok(())
    }

    /// Sample indices whose cell centre lies inside `[a, b]`.
    fn samples_in(&self, a: f64, b: f64) -> impl Iterator<Item = usize> + '_ {
        let lo = ((a - self.x_min) / self.spacing).ceil().max(0.0) as usize;
        let hi = ((b - self.x_min) / self.spacing).floor();
        let hi = if hi < 0.0 { None } else { Some((hi as usize).min(self.heights.len().saturating_sub(1))) };
        match hi {
            Some(hi) if !self.heights.is_empty() && lo <= hi => lo..hi + 1,
            _ => 0..0,
        }
    }

    /// Ground-truth contact under a sensor whose touching surface spans
    /// `[x - length / 2, x + length / 2]` with its face at height `z`.
    pub fn contact_response(&self, x: f64, z: f64, length: f64) -> ContactSpec {
        let left = x - length / 2.0;
        let idx: Vec<usize> = self.samples_in(left, left + length).collect();
        if idx.is_empty() {
            return ContactSpec::none();
        }
        match self.medium {
            MediumType::Liquid | MediumType::Semiliquid => {
                let pen = idx.iter().map(|&i| (self.heights[i] - z).max(0.0)).sum::<f64>() / idx.len() as f64;
                let c = (pen / self.wet_depth).clamp(0.0, 1.0);
                if c <= 0.0 {
                    return ContactSpec::none();
                }
                let half = c * length / 2.0;
                ContactSpec::single(length / 2.0 - half, length / 2.0 + half, self.albedo)
            }
            MediumType::Film | MediumType::Rigid => {
                let mut intervals = Vec::new();
                let mut run: Option<(f64, f64)> = None;
                for &i in &idx {
                    let cx = self.x_min + i as f64 * self.spacing - left;
                    let cell = ((cx - self.spacing / 2.0).max(0.0), (cx + self.spacing / 2.0).min(length));
                    if self.heights[i] >= z {
                        run = Some(match run {
                            Some((s, _)) => (s, cell.1),
                            None => cell,
                        });
                    } else if let Some((s, e)) = run.take() {
                        intervals.push(ContactInterval::new(s, e, self.albedo));
                    }
                }
                if let Some((s, e)) = run {
                    intervals.push(ContactInterval::new(s, e, self.albedo));
                }
                ContactSpec { intervals }
            }
        }
    }

    /// Thin liquid and semiliquid media where the sensor is in contact.
    pub fn spread(&mut self, x: f64, z: f64, length: f64) {
        if !matches!(self.medium, MediumType::Liquid | MediumType::Semiliquid) || self.spread_rate == 0.0 {
            return;
        }
        let left = x - length / 2.0;
        let idx: Vec<usize> = self.samples_in(left, left + length).collect();
        for i in idx {
            let h = &mut self.heights[i];
            let pen = *h - z;
            if pen > 0.0 {
                *h = (*h - self.spread_rate * pen).max(self.floor);
            }
        }
    }
}

/// Fraction of the touching surface covered by a contact spec.
pub fn spec_coverage(spec: &ContactSpec, length: f64) -> f64 {
    spec.intervals.iter().map(|i| i.end_mm - i.start_mm).sum::<f64>() / length
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndEffectorState {
    /// Lateral x, depth y and height z of the sensor face, mm.
    pub position: [f64; 3],
    /// mm/s.
    pub velocity: [f64; 3],
    pub gripper_aperture: f64,
}

impl EndEffectorState {
    pub fn at(x: f64, z: f64) -> Self {
        Self {
            position: [x, 0.0, z],
            velocity: [0.0; 3],
            gripper_aperture: 0.0,
        }
    }
}

/// Axis-aligned position bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Workspace {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            min: [-60.0, -60.0, -20.0],
            max: [60.0, 60.0, 100.0],
        }
    }
}

impl Workspace {
    pub fn check(&self, s: &EndEffectorState) -> Result<(), ControlError> {
        for (k, axis) in ["x", "y", "z"].into_iter().enumerate() {
            let v = s.position[k];
            if !(self.min[k]..=self.max[k]).contains(&v) {
                return Err(ControlError::WorkspaceBound {
                    axis,
                    value: v,
                    min: self.min[k],
                    max: self.max[k],
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdGains {
    /// mm of height per unit coverage error.
    pub kp: f64,
    /// mm per unit coverage-error change between steps.
    pub kd: f64,
    pub target_coverage: f64,
    /// Hz.
    pub control_rate: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self {
            kp: 2.0,
            kd: 0.5,
            target_coverage: 0.5,
            control_rate: 30.0,
        }
    }
}

impl PdGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.kp >= 0.0 && self.kd >= 0.0) {
            return Err(ControlError::InvalidParameter("gains must be non-negative".into()));
        }
        if !(self.target_coverage > 0.0 && self.target_coverage < 1.0) {
            return Err(ControlError::InvalidParameter("target coverage must lie in (0, 1)".into()));
        }
        if !(self.control_rate > 0.0) {
            return Err(ControlError::InvalidParameter("control rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpreadParams {
    /// Lateral sweep speed, mm/s; the sweep reverses at the workspace edges.
    pub sweep_speed: f64,
    /// Largest height change per step, mm.
    pub dz_limit: f64,
    /// Lateral margin kept from the workspace bounds when reversing, mm.
    pub turn_margin: f64,
}

impl Default for SpreadParams {
    fn default() -> Self {
        Self {
            sweep_speed: 5.0,
            dz_limit: 1.0,
            turn_margin: 10.0,
        }
    }
}

/// PD height regulator holding the previous coverage error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpreadController {
    prev_error: Option<f64>,
}

impl SpreadController {
    /// Height command for one observation; positive is up.
    pub fn command(&mut self, gains: &PdGains, observed_coverage: f64, dz_limit: f64) -> f64 {
        let e = gains.target_coverage - observed_coverage;
        let de = e - self.prev_error.unwrap_or(e);
        self.prev_error = Some(e);
        (-(gains.kp * e + gains.kd * de)).clamp(-dz_limit, dz_limit)
    }
}

/// One spreading step: PD height update plus a constant-speed lateral sweep.
pub fn step_spread(
    state: &EndEffectorState,
    controller: &mut SpreadController,
    gains: &PdGains,
    params: &SpreadParams,
    workspace: &Workspace,
    observed_coverage: f64,
) -> Result<(EndEffectorState, f64), ControlError> {
    if !(0.0..=1.0).contains(&observed_coverage) {
        return Err(ControlError::InvalidParameter(format!(
            "observed coverage {observed_coverage} outside [0, 1]"
        )));
    }
    let dt = 1.0 / gains.control_rate;
    let dz = controller.command(gains, observed_coverage, params.dz_limit);
    let mut next = *state;
    let mut vx = if state.velocity[0] == 0.0 { params.sweep_speed } else { state.velocity[0] };
    let x = state.position[0] + vx * dt;
    if (vx > 0.0 && x > workspace.max[0] - params.turn_margin) || (vx < 0.0 && x < workspace.min[0] + params.turn_margin) {
        vx = -vx;
    }
    next.position[0] += vx * dt;
    next.position[2] += dz;
    next.velocity = [vx, 0.0, dz / dt];
    workspace.check(&next)?;
    Ok((next, dz))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DipParams {
    /// mm/s before first contact.
    pub fast_speed: f64,
    /// mm/s once in contact.
    pub slow_speed: f64,
    pub stop_coverage: f64,
    /// Largest allowed descent from the start height, mm.
    pub travel_limit: f64,
    pub control_rate: f64,
}

impl Default for DipParams {
    fn default() -> Self {
        Self {
            fast_speed: 30.0,
            slow_speed: 3.0,
            stop_coverage: 0.5,
            travel_limit: 80.0,
            control_rate: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DipPhase {
    Fast,
    Slow,
    Stop,
}

impl DipPhase {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fast => "fast",
            Self::Slow => "slow",
            Self::Stop => "stop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DipStep {
    Moving(EndEffectorState, DipPhase),
    Done(EndEffectorState),
}

pub fn step_dip(state: &EndEffectorState, start_z: f64, params: &DipParams, coverage: f64) -> Result<DipStep, ControlError> {
    if !(params.fast_speed > 0.0 && params.slow_speed > 0.0) {
        return Err(ControlError::InvalidParameter("dip speeds must be positive".into()));
    }
    if !(params.stop_coverage > 0.0 && params.stop_coverage <= 1.0) {
        return Err(ControlError::InvalidParameter("stop coverage must lie in (0, 1]".into()));
    }
    if coverage > params.stop_coverage {
        let mut s = *state;
        s.velocity = [0.0; 3];
        return Ok(DipStep::Done(s));
    }
    let (speed, phase) = if coverage > 0.0 {
        (params.slow_speed, DipPhase::Slow)
    } else {
        (params.fast_speed, DipPhase::Fast)
    };
    let mut s = *state;
    s.position[2] -= speed / params.control_rate;
    s.velocity = [0.0, 0.0, -speed];
    if start_z - s.position[2] > params.travel_limit {
        return Err(ControlError::TravelLimit {
            limit: params.travel_limit,
        });
    }
    Ok(DipStep::Moving(s, phase))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilmParams {
    /// Lateral speed when one sensor is in contact, mm/s.
    pub speed: f64,
    /// Return-to-centre gain with no contact, 1/s.
    pub return_gain: f64,
    pub center: f64,
    pub control_rate: f64,
}

impl Default for FilmParams {
    fn default() -> Self {
        Self {
            speed: 10.0,
            return_gain: 1.0,
            center: 0.0,
            control_rate: 30.0,
        }
    }
}

/// Lateral velocity chosen by the film policy.
pub fn film_velocity(left_contact: bool, right_contact: bool, x: f64, params: &FilmParams) -> f64 {
    match (left_contact, right_contact) {
        (false, true) => params.speed,
        (true, false) => -params.speed,
        (true, true) => 0.0,
        (false, false) => -params.return_gain * (x - params.center),
    }
}

pub fn step_film(left_contact: bool, right_contact: bool, state: &EndEffectorState, params: &FilmParams) -> EndEffectorState {
    let vx = film_velocity(left_contact, right_contact, state.position[0], params);
    let mut s = *state;
    s.position[0] += vx / params.control_rate;
    s.velocity = [vx, 0.0, 0.0];
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspParams {
    /// Closing distance per step, mm.
    pub close_step: f64,
    pub stop_pixels: usize,
}

impl Default for GraspParams {
    fn default() -> Self {
        Self {
            close_step: 0.2,
            stop_pixels: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraspStep {
    Closing(f64),
    Done(f64),
}

pub fn step_grasp(pixel_count: usize, aperture: f64, params: &GraspParams) -> Result<GraspStep, ControlError> {
    if !(aperture > 0.0) {
        return Err(ControlError::InvalidParameter("aperture must be positive".into()));
    }
    if !(params.close_step > 0.0) {
        return Err(ControlError::InvalidParameter("close step must be positive".into()));
    }
    if pixel_count > params.stop_pixels {
        return Ok(GraspStep::Done(aperture));
    }
    let next = aperture - params.close_step;
    if next <= 0.0 {
        return Err(ControlError::GraspFailed);
    }
    Ok(GraspStep::Closing(next))
}

/// What one control step sees of the contact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub coverage: f64,
    pub pixel_count: usize,
}

pub trait Sensing {
    fn observe(&mut self, spec: &ContactSpec) -> Result<Observation, ControlError>;
}

/// Coverage and pixel count taken directly from the contact spec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub touching_length: f64,
    pub width: usize,
    pub height: usize,
}

impl Sensing for GroundTruth {
    fn observe(&mut self, spec: &ContactSpec) -> Result<Observation, ControlError> {
        let cols = spec.column_support(self.touching_length, self.width).iter().filter(|c| **c).count();
        Ok(Observation {
            coverage: spec_coverage(spec, self.touching_length).clamp(0.0, 1.0),
            pixel_count: cols * self.height,
        })
    }
}

/// Renders each observation, segments it against a no-contact reference and
/// measures the mask.
#[derive(Debug, Clone)]
pub struct RenderedSensing {
    scene: Scene2D,
    settings: RenderSettings,
    reference: ReferenceState,
    thresholds: Thresholds,
    frame: u64,
    last_mask: Option<ContactMask>,
}

impl RenderedSensing {
    /// Builds the reference from `reference_frames` no-contact renders.
    pub fn new(
        scene: Scene2D,
        settings: RenderSettings,
        thresholds: Thresholds,
        reference_frames: usize,
    ) -> Result<Self, ControlError> {
        let frames = (0..reference_frames as u64)
            .map(|i| {
                let s = RenderSettings {
                    seed: settings.seed.wrapping_add(i),
                    ..settings
                };
                render(&scene, &ContactLayout::Uniform(ContactSpec::none()), &s)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let reference = build_reference(&frames, reference_frames)?;
        Ok(Self {
            scene,
            settings,
            reference,
            thresholds,
            frame: reference_frames as u64,
            last_mask: None,
        })
    }

    pub fn touching_length(&self) -> f64 {
        self.scene.touching_length()
    }

    /// Mask segmented at the most recent observation.
    pub fn last_mask(&self) -> Option<&ContactMask> {
        self.last_mask.as_ref()
    }
}

impl Sensing for RenderedSensing {
    fn observe(&mut self, spec: &ContactSpec) -> Result<Observation, ControlError> {
        let s = RenderSettings {
            seed: self.settings.seed.wrapping_add(self.frame),
            ..self.settings
        };
        self.frame += 1;
        let img = render(&self.scene, &ContactLayout::Uniform(spec.clone()), &s)?;
        let mask = segment(&img, &self.reference, &self.thresholds)?;
        let n = mask.count();
        self.last_mask = Some(mask);
        Ok(Observation {
            coverage: n as f64 / (s.width * s.height) as f64,
            pixel_count: n,
        })
    }
}

/// One logged control step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRow {
    pub step: usize,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub aperture: f64,
    pub coverage: f64,
    pub pixel_count: usize,
    pub command: f64,
    pub phase: String,
}

fn f6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut s = String::from("step,x_mm,y_mm,z_mm,vx_mm_s,vy_mm_s,vz_mm_s,aperture_mm,coverage,pixel_count,command,phase\n");
    for r in rows {
        let [x, y, z] = r.position.map(f6);
        let [vx, vy, vz] = r.velocity.map(f6);
        s.push_str(&format!(
            "{},{x},{y},{z},{vx},{vy},{vz},{},{},{},{},{}\n",
            r.step,
            f6(r.aperture),
            f6(r.coverage),
            r.pixel_count,
            f6(r.command),
            r.phase
        ));
    }
    s
}

fn row(step: usize, s: &EndEffectorState, obs: Observation, command: f64, phase: &str) -> LogRow {
    LogRow {
        step,
        position: s.position,
        velocity: s.velocity,
        aperture: s.gripper_aperture,
        coverage: obs.coverage,
        pixel_count: obs.pixel_count,
        command,
        phase: phase.to_string(),
    }
}

/// Closed spreading loop for `steps` steps; the world is thinned as it is
/// swept. Row `k` holds the observation at step `k` and the command issued.
#[allow(clippy::too_many_arguments)]
pub fn run_spread(
    world: &mut ContactWorld,
    start: EndEffectorState,
    gains: &PdGains,
    params: &SpreadParams,
    workspace: &Workspace,
    sensing: &mut dyn Sensing,
    touching_length: f64,
    steps: usize,
) -> Result<Vec<LogRow>, ControlError> {
    world.validate()?;
    gains.validate()?;
    workspace.check(&start)?;
    let mut ctl = SpreadController::default();
    let mut state = start;
    let mut log = Vec::with_capacity(steps);
    for k in 0..steps {
        let spec = world.contact_response(state.position[0], state.position[2], touching_length);
        let obs = sensing.observe(&spec)?;
        let (next, dz) = step_spread(&state, &mut ctl, gains, params, workspace, obs.coverage)?;
        log.push(row(k, &state, obs, dz, "spread"));
        world.spread(state.position[0], state.position[2], touching_length);
        state = next;
    }
    Ok(log)
}

/// Dip until coverage exceeds the stop level; the last row is the stop step.
pub fn run_dip(
    world: &ContactWorld,
    start: EndEffectorState,
    params: &DipParams,
    sensing: &mut dyn Sensing,
    touching_length: f64,
) -> Result<Vec<LogRow>, ControlError> {
    world.validate()?;
    let mut state = start;
    let mut log = Vec::new();
    for k in 0.. {
        let spec = world.contact_response(state.position[0], state.position[2], touching_length);
        let obs = sensing.observe(&spec)?;
        match step_dip(&state, start.position[2], params, obs.coverage)? {
            DipStep::Moving(next, phase) => {
                log.push(row(k, &state, obs, next.velocity[2], phase.name()));
                state = next;
            }
            DipStep::Done(s) => {
                log.push(row(k, &s, obs, 0.0, DipPhase::Stop.name()));
                break;
            }
        }
    }
    Ok(log)
}

/// A film strip whose centre drifts sinusoidally between two sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilmTrack {
    /// Gap between the two sensor centres, mm.
    pub sensor_gap: f64,
    /// Film strip width, mm.
    pub film_width: f64,
    pub drift_amplitude: f64,
    /// Drift period, s.
    pub drift_period: f64,
}

impl Default for FilmTrack {
    fn default() -> Self {
        Self {
            sensor_gap: 16.0,
            film_width: 6.0,
            drift_amplitude: 8.0,
            drift_period: 6.0,
        }
    }
}

impl FilmTrack {
    pub fn film_center(&self, t: f64) -> f64 {
        self.drift_amplitude * (std::f64::consts::TAU * t / self.drift_period).sin()
    }

    /// Contact on the (left, right) sensors for a gripper centred at `x`.
    pub fn contact_specs(&self, x: f64, t: f64, length: f64, albedo: Rgb) -> (ContactSpec, ContactSpec) {
        let c = self.film_center(t);
        let (fa, fb) = (c - self.film_width / 2.0, c + self.film_width / 2.0);
        let on = |sx: f64| {
            let (a, b) = ((fa - (sx - length / 2.0)).max(0.0), (fb - (sx - length / 2.0)).min(length));
            if b > a {
                ContactSpec::single(a, b, albedo)
            } else {
                ContactSpec::none()
            }
        };
        (
            on(x - self.sensor_gap / 2.0 - length / 2.0),
            on(x + self.sensor_gap / 2.0 + length / 2.0),
        )
    }
}

/// Film following; the two sensors share one sensing pipeline.
pub fn run_film(
    track: &FilmTrack,
    start: EndEffectorState,
    params: &FilmParams,
    sensing: &mut dyn Sensing,
    touching_length: f64,
    albedo: Rgb,
    steps: usize,
) -> Result<Vec<LogRow>, ControlError> {
    let mut state = start;
    let mut log = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = k as f64 / params.control_rate;
        let (ls, rs) = track.contact_specs(state.position[0], t, touching_length, albedo);
        let lo = sensing.observe(&ls)?;
        let ro = sensing.observe(&rs)?;
        let (l, r) = (lo.pixel_count > 0, ro.pixel_count > 0);
        let next = step_film(l, r, &state, params);
        let phase = match (l, r) {
            (false, false) => "none",
            (true, false) => "left",
            (false, true) => "right",
            (true, true) => "both",
        };
        let obs = Observation {
            coverage: lo.coverage.max(ro.coverage),
            pixel_count: lo.pixel_count + ro.pixel_count,
        };
        log.push(row(k, &state, obs, next.velocity[0], phase));
        state = next;
    }
    Ok(log)
}

/// A compliant object centred between the gripper fingers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspObject {
    /// Object width, mm; `None` means nothing is in the gripper.
    pub width: Option<f64>,
    /// Per-side compression giving full coverage, mm.
    pub softness: f64,
    pub albedo: Rgb,
}

impl Default for GraspObject {
    fn default() -> Self {
        Self {
            width: Some(20.0),
            softness: 2.0,
            albedo: default_albedo(),
        }
    }
}

impl GraspObject {
    pub fn contact_spec(&self, aperture: f64, length: f64) -> ContactSpec {
        let Some(w) = self.width else {
            return ContactSpec::none();
        };
        let d = (w - aperture) / 2.0;
        let c = (d / self.softness).clamp(0.0, 1.0);
        if c <= 0.0 {
            return ContactSpec::none();
        }
        let half = c * length / 2.0;
        ContactSpec::single(length / 2.0 - half, length / 2.0 + half, self.albedo)
    }
}

/// Close until one sensor reports more than `stop_pixels` contact pixels.
pub fn run_grasp(
    object: &GraspObject,
    start_aperture: f64,
    params: &GraspParams,
    sensing: &mut dyn Sensing,
    touching_length: f64,
) -> Result<Vec<LogRow>, ControlError> {
    let mut state = EndEffectorState {
        gripper_aperture: start_aperture,
        ..EndEffectorState::at(0.0, 0.0)
    };
    let mut log = Vec::new();
    for k in 0.. {
        let spec = object.contact_spec(state.gripper_aperture, touching_length);
        let obs = sensing.observe(&spec)?;
        match step_grasp(obs.pixel_count, state.gripper_aperture, params)? {
            GraspStep::Closing(a) => {
                log.push(row(k, &state, obs, -params.close_step, "closing"));
                state.gripper_aperture = a;
            }
            GraspStep::Done(_) => {
                log.push(row(k, &state, obs, 0.0, "done"));
                break;
            }
        }
    }
    Ok(log)
}
