//! Closed-form planar optics for the wedge sensor: Snell refraction, the
//! critical angle, and the three suppression/transmission design conditions
//! (external rejection, internal rejection, contact transmission).
//!
//! Coordinates: the touching surface runs along +x from the origin, the
//! transparent medium lies at `y > 0`, and the viewing surface rises from the
//! far end of the touching surface at the wedge angle `theta_tv`. Ray "tilt"
//! angles are measured from the downward touching-surface normal, positive
//! toward the viewing surface; for a ray that strikes the touching surface the
//! tilt equals its signed incidence angle, which is also the tilt of the
//! specularly reflected ray from the upward normal.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Segment, Vec2};

/// Tolerance for angle comparisons (radians).
pub const ANGLE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("no total internal reflection: n_medium {n_medium} must exceed n_air {n_air}")]
    NoTir { n_medium: f64, n_air: f64 },
    #[error("incidence angle {0} rad outside [0, pi/2)")]
    IncidenceOutOfRange(f64),
    #[error("theta_tv {theta_tv} rad outside the relaxed camera-placement regime [{lo}, {hi})")]
    OutsideRelaxedRegime { theta_tv: f64, lo: f64, hi: f64 },
    #[error("invalid optical config: {0}")]
    InvalidConfig(String),
}

/// Refractive indices of the transparent medium and the surrounding air.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumPair {
    pub n_medium: f64,
    pub n_air: f64,
}

impl MediumPair {
    pub fn new(n_medium: f64, n_air: f64) -> Result<Self, OpticsError> {
        let m = Self { n_medium, n_air };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(self.n_air > 0.0 && self.n_medium > self.n_air) || !self.n_medium.is_finite() {
            return Err(OpticsError::NoTir {
                n_medium: self.n_medium,
                n_air: self.n_air,
            });
        }
        Ok(())
    }

    /// `n_medium / n_air`.
    pub fn ratio(&self) -> f64 {
        self.n_medium / self.n_air
    }
}

impl Default for MediumPair {
    /// Silicone gel / acrylic against air.
    fn default() -> Self {
        Self {
            n_medium: 1.45,
            n_air: 1.0,
        }
    }
}

/// TIR onset angle `asin(n_air / n_medium)`.
pub fn critical_angle(media: MediumPair) -> Result<f64, OpticsError> {
    media.validate()?;
    Ok((media.n_air / media.n_medium).asin())
}

/// Which way a ray crosses the medium/air interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    /// Air into the dense medium.
    Entering,
    /// Dense medium out to air.
    Exiting,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Refraction {
    /// Transmitted with this angle from the normal.
    Transmitted(f64),
    TotalInternalReflection,
}

impl Refraction {
    pub fn angle(self) -> Option<f64> {
        match self {
            Refraction::Transmitted(a) => Some(a),
            Refraction::TotalInternalReflection => None,
        }
    }
}

/// Snell's law for an incidence angle in `[0, pi/2)`.
pub fn refract(incident: f64, media: MediumPair, crossing: Crossing) -> Result<Refraction, OpticsError> {
    media.validate()?;
    if !(0.0..FRAC_PI_2).contains(&incident) {
        return Err(OpticsError::IncidenceOutOfRange(incident));
    }
    let ratio = match crossing {
        Crossing::Entering => media.n_air / media.n_medium,
        Crossing::Exiting => media.n_medium / media.n_air,
    };
    let s = ratio * incident.sin();
    if s >= 1.0 {
        return Ok(Refraction::TotalInternalReflection);
    }
    Ok(Refraction::Transmitted(s.asin()))
}

/// Unpolarized Fresnel reflectance for an incidence angle in `[0, pi/2)`;
/// 1 under total internal reflection.
pub fn fresnel_reflectance(incident: f64, media: MediumPair, crossing: Crossing) -> f64 {
    let (n1, n2) = match crossing {
        Crossing::Entering => (media.n_air, media.n_medium),
        Crossing::Exiting => (media.n_medium, media.n_air),
    };
    let sin_t = n1 / n2 * incident.sin();
    if sin_t >= 1.0 {
        return 1.0;
    }
    let cos_i = incident.cos();
    let cos_t = (1.0 - sin_t * sin_t).sqrt();
    let rs = (n1 * cos_i - n2 * cos_t) / (n1 * cos_i + n2 * cos_t);
    let rp = (n2 * cos_i - n1 * cos_t) / (n2 * cos_i + n1 * cos_t);
    0.5 * (rs * rs + rp * rp)
}

/// Point-source LED with a uniform emission cone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedPose {
    /// mm
    pub position: Vec2,
    /// Cone axis tilt from the downward touching normal (rad, + toward viewing surface).
    pub tilt: f64,
    /// rad
    pub half_angle: f64,
}

impl LedPose {
    /// Unit direction for a given tilt.
    pub fn direction(tilt: f64) -> Vec2 {
        Vec2::new(tilt.sin(), -tilt.cos())
    }
}

/// Pinhole camera with a small entrance aperture, outside the medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    /// Aperture centre (mm).
    pub position: Vec2,
    /// Viewing direction as a standard angle from +x (rad).
    pub axis: f64,
    /// Full field of view (rad).
    pub fov: f64,
    /// Entrance aperture width (mm).
    pub aperture: f64,
}

/// Per-surface absorptivity of the black shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Absorptivity {
    /// Internal shell surface A next to the touching surface.
    pub shell: f64,
    /// Remaining walls (top, upper end wall).
    pub walls: f64,
    pub baffles: f64,
}

impl Absorptivity {
    pub const IDEAL: Absorptivity = Absorptivity {
        shell: 1.0,
        walls: 1.0,
        baffles: 1.0,
    };

    /// Matte black coating; an uncalibrated stand-in.
    pub const REALISTIC: Absorptivity = Absorptivity {
        shell: 0.95,
        walls: 0.95,
        baffles: 0.95,
    };

    pub fn uniform(a: f64) -> Self {
        Self {
            shell: a,
            walls: a,
            baffles: a,
        }
    }
}

/// Full planar sensor geometry. Angles in radians, lengths in millimetres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OpticalConfigFile", into = "OpticalConfigFile")]
pub struct OpticalConfig {
    pub media: MediumPair,
    /// Angle between touching and viewing surfaces.
    pub theta_tv: f64,
    /// Inclination of shell surface A from the touching surface.
    pub theta_s: f64,
    pub touching_length: f64,
    /// Height of the medium above the touching surface.
    pub height: f64,
    /// Vertical rise of shell surface A before the end wall turns vertical.
    pub shell_rise: f64,
    pub led: LedPose,
    pub camera: CameraPose,
    pub baffles: Vec<Segment>,
    pub absorptivity: Absorptivity,
}

impl Default for OpticalConfig {
    /// Perpendicular touching/viewing surfaces, vertical shell wall, LED tilted
    /// toward the shell, camera looking down through the viewing surface.
    fn default() -> Self {
        let deg = f64::to_radians;
        Self {
            media: MediumPair::default(),
            theta_tv: deg(90.0),
            theta_s: deg(90.0),
            touching_length: 12.0,
            height: 8.0,
            shell_rise: 1.5,
            led: LedPose {
                position: Vec2::new(9.5, 7.4),
                tilt: deg(-22.0),
                half_angle: deg(40.0),
            },
            camera: CameraPose {
                position: Vec2::new(14.0, 6.0),
                axis: deg(-146.0),
                fov: deg(120.0),
                aperture: 1.0,
            },
            baffles: vec![
                Segment::new(Vec2::new(8.3, 8.0), Vec2::new(8.7, 6.9)),
                Segment::new(Vec2::new(11.3, 8.0), Vec2::new(11.1, 7.1)),
            ],
            absorptivity: Absorptivity::IDEAL,
        }
    }
}

impl OpticalConfig {
    pub fn critical_angle(&self) -> f64 {
        (self.media.n_air / self.media.n_medium).asin()
    }

    pub fn touching_surface(&self) -> Segment {
        Segment::new(Vec2::new(0.0, 0.0), Vec2::new(self.touching_length, 0.0))
    }

    /// From the wedge vertex up to the top of the medium.
    pub fn viewing_surface(&self) -> Segment {
        let v = Vec2::new(self.touching_length, 0.0);
        let dir = Vec2::new(-self.theta_tv.cos(), self.theta_tv.sin());
        Segment::new(v, v + dir * (self.height / self.theta_tv.sin()))
    }

    /// Shell surface A, from its top point D down to the touching-surface origin.
    pub fn shell_surface(&self) -> Segment {
        let dir = Vec2::new(self.theta_s.cos(), self.theta_s.sin());
        let d = dir * (self.shell_rise / self.theta_s.sin());
        Segment::new(d, Vec2::new(0.0, 0.0))
    }

    /// Closed medium boundary, counter-clockwise so left normals point inward:
    /// touching, viewing, top wall, end wall, shell A.
    pub fn boundary(&self) -> [Segment; 5] {
        let t = self.touching_surface();
        let v = self.viewing_surface();
        let a = self.shell_surface();
        let g = Vec2::new(a.a.x, self.height);
        [
            t,
            v,
            Segment::new(v.b, g),
            Segment::new(g, a.a),
            a,
        ]
    }

    /// Point-in-medium test against [`Self::boundary`].
    pub fn contains(&self, p: Vec2) -> bool {
        let boundary = self.boundary();
        // strictly inside: off every edge, odd crossing count
        let on_edge = boundary.iter().any(|s| {
            let d = s.b - s.a;
            d.cross(p - s.a).abs() <= 1e-12 * d.norm() && (p - s.a).dot(d) >= 0.0 && (p - s.b).dot(d) <= 0.0
        });
        let crossings = boundary
            .iter()
            .filter(|s| (s.a.y > p.y) != (s.b.y > p.y))
            .filter(|s| p.x < s.a.x + (p.y - s.a.y) * (s.b.x - s.a.x) / (s.b.y - s.a.y))
            .count();
        !on_edge && crossings % 2 == 1
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        self.media.validate()?;
        let bad = |m: &str| Err(OpticsError::InvalidConfig(m.to_string()));
        if !(self.theta_tv > 0.0 && self.theta_tv < std::f64::consts::PI) {
            return bad("theta_tv must lie in (0, 180) degrees");
        }
        if !(self.theta_s > 0.0 && self.theta_s <= FRAC_PI_2 + ANGLE_EPS) {
            return bad("theta_s must lie in (0, 90] degrees");
        }
        if !(self.touching_length > 0.0 && self.height > 0.0) {
            return bad("touching length and height must be positive");
        }
        if !(self.shell_rise > 0.0 && self.shell_rise < self.height) {
            return bad("shell rise must lie in (0, height)");
        }
        let shell_top = self.shell_surface().a;
        let view_top = self.viewing_surface().b;
        if shell_top.x >= self.touching_length || view_top.x <= shell_top.x {
            return bad("shell surface A crosses the viewing side of the medium");
        }
        let a = self.absorptivity;
        if ![a.shell, a.walls, a.baffles]
            .iter()
            .all(|v| (0.0..=1.0).contains(v))
        {
            return bad("absorptivities must lie in [0, 1]");
        }
        if !(0.0..FRAC_PI_2).contains(&self.led.half_angle) {
            return bad("LED half-angle must lie in [0, 90) degrees");
        }
        if !self.contains(self.led.position) {
            return bad("LED must sit inside the medium");
        }
        if self.contains(self.camera.position) {
            return bad("camera must sit outside the medium");
        }
        if !(self.camera.fov > 0.0 && self.camera.fov < std::f64::consts::PI) {
            return bad("camera fov must lie in (0, 180) degrees");
        }
        if self.camera.aperture <= 0.0 {
            return bad("camera aperture must be positive");
        }
        if self.baffles.iter().any(|b| b.length() <= 0.0) {
            return bad("baffles must have positive length");
        }
        Ok(())
    }
}

/// On-disk form of [`OpticalConfig`]: degrees and millimetres. Omitted
/// fields take the default geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticalConfigFile {
    pub n_medium: f64,
    pub n_air: f64,
    pub theta_tv_deg: f64,
    pub theta_s_deg: f64,
    pub touching_length_mm: f64,
    pub height_mm: f64,
    pub shell_rise_mm: f64,
    pub led: LedFile,
    pub camera: CameraFile,
    pub baffles: Vec<[[f64; 2]; 2]>,
    pub absorptivity: Absorptivity,
}

impl Default for OpticalConfigFile {
    fn default() -> Self {
        OpticalConfig::default().into()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedFile {
    pub position_mm: [f64; 2],
    pub tilt_deg: f64,
    pub half_angle_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraFile {
    pub position_mm: [f64; 2],
    pub axis_deg: f64,
    pub fov_deg: f64,
    pub aperture_mm: f64,
}

impl TryFrom<OpticalConfigFile> for OpticalConfig {
    type Error = OpticsError;

    fn try_from(f: OpticalConfigFile) -> Result<Self, Self::Error> {
        let p = |a: [f64; 2]| Vec2::new(a[0], a[1]);
        let cfg = OpticalConfig {
            media: MediumPair {
                n_medium: f.n_medium,
                n_air: f.n_air,
            },
            theta_tv: f.theta_tv_deg.to_radians(),
            theta_s: f.theta_s_deg.to_radians(),
            touching_length: f.touching_length_mm,
            height: f.height_mm,
            shell_rise: f.shell_rise_mm,
            led: LedPose {
                position: p(f.led.position_mm),
                tilt: f.led.tilt_deg.to_radians(),
                half_angle: f.led.half_angle_deg.to_radians(),
            },
            camera: CameraPose {
                position: p(f.camera.position_mm),
                axis: f.camera.axis_deg.to_radians(),
                fov: f.camera.fov_deg.to_radians(),
                aperture: f.camera.aperture_mm,
            },
            baffles: f
                .baffles
                .iter()
                .map(|s| Segment::new(p(s[0]), p(s[1])))
                .collect(),
            absorptivity: f.absorptivity,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Degrees for output, trimmed of float noise from the radian round trip.
fn out_deg(rad: f64) -> f64 {
    (rad.to_degrees() * 1e9).round() / 1e9
}

impl From<OpticalConfig> for OpticalConfigFile {
    fn from(c: OpticalConfig) -> Self {
        let a = |v: Vec2| [v.x, v.y];
        OpticalConfigFile {
            n_medium: c.media.n_medium,
            n_air: c.media.n_air,
            theta_tv_deg: out_deg(c.theta_tv),
            theta_s_deg: out_deg(c.theta_s),
            touching_length_mm: c.touching_length,
            height_mm: c.height,
            shell_rise_mm: c.shell_rise,
            led: LedFile {
                position_mm: a(c.led.position),
                tilt_deg: out_deg(c.led.tilt),
                half_angle_deg: out_deg(c.led.half_angle),
            },
            camera: CameraFile {
                position_mm: a(c.camera.position),
                axis_deg: out_deg(c.camera.axis),
                fov_deg: out_deg(c.camera.fov),
                aperture_mm: c.camera.aperture,
            },
            baffles: c.baffles.iter().map(|s| [a(s.a), a(s.b)]).collect(),
            absorptivity: c.absorptivity,
        }
    }
}

/// Outcome of one design condition. `margin > 0` exactly when satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub satisfied: bool,
    /// rad
    pub margin: f64,
}

impl Check {
    fn from_margin(margin: f64) -> Self {
        let margin = if margin.abs() <= ANGLE_EPS { 0.0 } else { margin };
        Self {
            satisfied: margin > 0.0,
            margin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InternalCheck {
    pub check: Check,
    /// Largest signed incidence of LED rays on the touching surface, `None`
    /// when no cone ray reaches it.
    pub max_theta_it: Option<f64>,
    /// Some cone ray reaches the viewing surface without touching anything.
    pub direct_view: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContactCheck {
    pub check: Check,
    /// Viewing-surface incidence window `(lo, hi)` of transmitted contact light.
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    pub critical_angle: f64,
    pub external_rejection: Check,
    pub internal_rejection: InternalCheck,
    pub contact_transmission: ContactCheck,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.external_rejection.satisfied
            && self.internal_rejection.check.satisfied
            && self.contact_transmission.check.satisfied
    }
}

/// External light refracted in through non-contact regions must meet TIR at
/// the viewing surface: `theta_tv > 2 theta_c`.
pub fn check_external_rejection(cfg: &OpticalConfig) -> Check {
    Check::from_margin(cfg.theta_tv - 2.0 * cfg.critical_angle())
}

/// Contact-scattered light must have a transmissible path out of the viewing
/// surface: `theta_tv < pi/2 + theta_c`.
pub fn check_contact_transmission(cfg: &OpticalConfig) -> ContactCheck {
    let tc = cfg.critical_angle();
    ContactCheck {
        check: Check::from_margin(FRAC_PI_2 + tc - cfg.theta_tv),
        window: ((cfg.theta_tv - FRAC_PI_2).max(-tc), tc),
    }
}

/// Every LED ray specularly reflected from a non-contact region must meet TIR
/// at the viewing surface: all signed incidences `theta_it < theta_tv - theta_c`.
/// A cone ray that reaches the viewing surface directly fails the condition.
pub fn check_internal_rejection(cfg: &OpticalConfig) -> InternalCheck {
    let limit = cfg.theta_tv - cfg.critical_angle();
    let led = cfg.led;
    let touching = cfg.touching_surface();
    let viewing = cfg.viewing_surface();

    // The hit set of each surface is an angular interval seen from the LED;
    // tilt is monotone along it, so extremes sit on interval boundaries.
    let mut candidates = Vec::with_capacity(64);
    for seg in [&touching, &viewing] {
        for (lo, hi) in subtended_in_cone(led, seg) {
            candidates.push(lo);
            candidates.push(hi);
            const INTERIOR: usize = 16;
            for k in 1..INTERIOR {
                candidates.push(lo + (hi - lo) * k as f64 / INTERIOR as f64);
            }
        }
    }

    let mut max_it: Option<f64> = None;
    let mut direct_view = false;
    for tilt in candidates {
        let dir = LedPose::direction(tilt);
        let t_hit = touching.intersect(led.position, dir).map(|h| h.0);
        let v_hit = viewing.intersect(led.position, dir).map(|h| h.0);
        match (t_hit, v_hit) {
            (Some(t), Some(v)) if v + 1e-12 < t => direct_view = true,
            (Some(_), _) => {
                max_it = Some(max_it.map_or(tilt, |m: f64| m.max(tilt)));
            }
            (None, Some(_)) => direct_view = true,
            (None, None) => {}
        }
    }

    let margin = if direct_view {
        limit - FRAC_PI_2
    } else {
        match max_it {
            Some(m) => limit - m,
            None => f64::INFINITY,
        }
    };
    InternalCheck {
        check: Check::from_margin(margin),
        max_theta_it: max_it,
        direct_view,
    }
}

/// Tilt sub-intervals of the LED cone whose rays cross `seg`.
fn subtended_in_cone(led: LedPose, seg: &Segment) -> Vec<(f64, f64)> {
    use std::f64::consts::PI;
    let wrap = |a: f64| {
        let mut a = (a + PI).rem_euclid(2.0 * PI) - PI;
        if a <= -PI {
            a += 2.0 * PI;
        }
        a
    };
    let tilt_of = |p: Vec2| {
        let d = p - led.position;
        // tilt = atan2(dx, -dy)
        d.x.atan2(-d.y)
    };
    let rel_a = wrap(tilt_of(seg.a) - led.tilt);
    let rel_b = wrap(tilt_of(seg.b) - led.tilt);
    let (lo, hi) = if rel_a <= rel_b { (rel_a, rel_b) } else { (rel_b, rel_a) };
    // The segment subtends less than pi; if the naive span exceeds pi the arc
    // wraps through the back of the cone.
    let pieces: Vec<(f64, f64)> = if hi - lo <= PI {
        vec![(lo, hi)]
    } else {
        vec![(hi, PI), (-PI, lo)]
    };
    let h = led.half_angle;
    pieces
        .into_iter()
        .filter_map(|(a, b)| {
            let a = a.max(-h);
            let b = b.min(h);
            (a <= b).then_some((a + led.tilt, b + led.tilt))
        })
        .collect()
}

/// Camera exclusion angle for the relaxed layout `theta_c <= theta_tv < 2 theta_c`:
/// the angle between the most slanted transmitted ambient ray and the
/// horizontal, `pi/2 + theta_tv - asin((n_m/n_a) sin(theta_tv - theta_c))`.
pub fn camera_exclusion_angle(cfg: &OpticalConfig) -> Result<f64, OpticsError> {
    cfg.media.validate()?;
    let tc = cfg.critical_angle();
    let lo = tc;
    let hi = 2.0 * tc;
    if !(cfg.theta_tv >= lo && cfg.theta_tv < hi) {
        return Err(OpticsError::OutsideRelaxedRegime {
            theta_tv: cfg.theta_tv,
            lo,
            hi,
        });
    }
    let max_incidence = cfg.theta_tv - tc;
    let s = (cfg.media.ratio() * max_incidence.sin()).min(1.0);
    let min_exit = s.asin();
    Ok(FRAC_PI_2 + cfg.theta_tv - min_exit)
}

pub fn full_report(cfg: &OpticalConfig) -> ConditionReport {
    ConditionReport {
        critical_angle: cfg.critical_angle(),
        external_rejection: check_external_rejection(cfg),
        internal_rejection: check_internal_rejection(cfg),
        contact_transmission: check_contact_transmission(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn media(n: f64) -> MediumPair {
        MediumPair::new(n, 1.0).unwrap()
    }

    fn with_tv(deg: f64) -> OpticalConfig {
        OpticalConfig {
            theta_tv: deg.to_radians(),
            ..OpticalConfig::default()
        }
    }

    #[test]
    fn critical_angle_examples() {
        // mpmath: asin(1/1.45)
        assert_abs_diff_eq!(critical_angle(media(1.45)).unwrap(), 0.761_012_754_224_729_8, epsilon = 1e-12);
        assert_abs_diff_eq!(critical_angle(media(2f64.sqrt())).unwrap(), FRAC_PI_4, epsilon = 1e-15);
        // mpmath: asin(1/1.33) = 48.7535 deg
        assert_abs_diff_eq!(critical_angle(media(1.33)).unwrap().to_degrees(), 48.753_466_631_327, epsilon = 1e-9);
    }

    #[test]
    fn critical_angle_rejects_non_dense_medium() {
        let m = MediumPair { n_medium: 1.0, n_air: 1.0 };
        assert!(matches!(critical_angle(m), Err(OpticsError::NoTir { .. })));
        let m = MediumPair { n_medium: 0.9, n_air: 1.0 };
        assert!(critical_angle(m).is_err());
    }

    #[test]
    fn refract_examples() {
        let m = media(1.45);
        assert_eq!(refract(0.0, m, Crossing::Exiting).unwrap(), Refraction::Transmitted(0.0));
        // mpmath: asin(1.45 sin 0.5)
        let a = refract(0.5, m, Crossing::Exiting).unwrap().angle().unwrap();
        assert_abs_diff_eq!(a, 0.768_652_233_864_715, epsilon = 1e-12);
        assert_eq!(
            refract(50f64.to_radians(), m, Crossing::Exiting).unwrap(),
            Refraction::TotalInternalReflection
        );
        assert!(refract(FRAC_PI_2, m, Crossing::Exiting).is_err());
        assert!(refract(-0.1, m, Crossing::Entering).is_err());
    }

    #[test]
    fn fresnel_normal_incidence_and_tir() {
        let m = media(1.5);
        // ((n1 - n2) / (n1 + n2))^2
        assert_abs_diff_eq!(fresnel_reflectance(0.0, m, Crossing::Entering), 0.04, epsilon = 1e-12);
        assert_abs_diff_eq!(fresnel_reflectance(0.0, m, Crossing::Exiting), 0.04, epsilon = 1e-12);
        assert_eq!(fresnel_reflectance(1.2, m, Crossing::Exiting), 1.0);
    }

    #[test]
    fn external_rejection_examples() {
        let c = check_external_rejection(&OpticalConfig::default());
        assert!(c.satisfied);
        // mpmath: 90 - 2 asin(1/1.45) = 2.79436 deg
        assert_abs_diff_eq!(c.margin.to_degrees(), 2.794_362_054_592_75, epsilon = 1e-9);

        let mut cfg = OpticalConfig::default();
        cfg.theta_tv = 2.0 * cfg.critical_angle();
        let c = check_external_rejection(&cfg);
        assert!(!c.satisfied);
        assert_eq!(c.margin, 0.0);

        assert!(!check_external_rejection(&with_tv(80.0)).satisfied);
    }

    #[test]
    fn contact_transmission_examples() {
        let tc = OpticalConfig::default().critical_angle();
        let c = check_contact_transmission(&OpticalConfig::default());
        assert!(c.check.satisfied);
        assert_abs_diff_eq!(c.window.0, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.window.1, tc, epsilon = 1e-15);

        let cfg = OpticalConfig {
            theta_tv: FRAC_PI_2 + tc,
            ..OpticalConfig::default()
        };
        assert!(!check_contact_transmission(&cfg).check.satisfied);

        let c = check_contact_transmission(&with_tv(120.0));
        assert!(c.check.satisfied);
        assert_abs_diff_eq!(c.window.0.to_degrees(), 30.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c.window.1, tc, epsilon = 1e-15);
    }

    #[test]
    fn internal_rejection_normal_incidence() {
        let mut cfg = OpticalConfig::default();
        cfg.led.position = Vec2::new(6.0, 4.0);
        cfg.led.tilt = 0.0;
        cfg.led.half_angle = 0.0;
        let r = check_internal_rejection(&cfg);
        assert!(r.check.satisfied);
        assert_eq!(r.max_theta_it, Some(0.0));
        assert!(!r.direct_view);
    }

    #[test]
    fn internal_rejection_boundary_is_strict() {
        let mut cfg = OpticalConfig::default();
        let limit = cfg.theta_tv - cfg.critical_angle();
        cfg.led.position = Vec2::new(2.0, 4.0);
        cfg.led.half_angle = 10f64.to_radians();
        cfg.led.tilt = limit - cfg.led.half_angle;
        let r = check_internal_rejection(&cfg);
        assert!(!r.check.satisfied);
        assert_eq!(r.check.margin, 0.0);
    }

    #[test]
    fn internal_rejection_flags_direct_view() {
        let mut cfg = OpticalConfig::default();
        cfg.led.position = Vec2::new(6.0, 6.0);
        cfg.led.tilt = 80f64.to_radians();
        cfg.led.half_angle = 5f64.to_radians();
        let r = check_internal_rejection(&cfg);
        assert!(r.direct_view);
        assert!(!r.check.satisfied);
    }

    #[test]
    fn default_geometry_passes_everything() {
        let cfg = OpticalConfig::default();
        cfg.validate().unwrap();
        let r = full_report(&cfg);
        assert!(r.all_pass(), "{r:?}");
        assert!(r.external_rejection.margin > 0.0);
        assert!(r.internal_rejection.check.margin > 0.0);
        assert!(r.contact_transmission.check.margin > 0.0);
    }

    #[test]
    fn full_report_perturbations() {
        let r = full_report(&with_tv(140.0));
        assert!(!r.contact_transmission.check.satisfied);
        let r = full_report(&with_tv(60.0));
        assert!(!r.external_rejection.satisfied);
    }

    #[test]
    fn camera_exclusion_examples() {
        let base = OpticalConfig::default();
        let tc = base.critical_angle();
        let at = |tv: f64| {
            camera_exclusion_angle(&OpticalConfig {
                theta_tv: tv,
                ..base.clone()
            })
        };
        assert_abs_diff_eq!(at(tc).unwrap(), FRAC_PI_2 + tc, epsilon = 1e-12);

        let tv = tc + 0.1;
        let expected = FRAC_PI_2 + tv - (1.45 * 0.1f64.sin()).asin();
        assert_abs_diff_eq!(at(tv).unwrap(), expected, epsilon = 1e-12);
        // decreasing in theta_tv (finite difference)
        assert!(at(tv + 1e-6).unwrap() < at(tv).unwrap());

        let near = 2.0 * tc - 1e-12;
        assert_abs_diff_eq!(at(near).unwrap(), near, epsilon = 1e-5);

        assert!(at(2.0 * tc).is_err());
        assert!(at(tc - 0.01).is_err());
        assert!(at(PI / 2.0).is_err());
    }

    #[test]
    fn config_file_roundtrip_in_degrees() {
        let cfg = OpticalConfig::default();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        assert!(json.contains("\"theta_tv_deg\": 90.0"));
        let back: OpticalConfig = serde_json::from_str(&json).unwrap();
        assert_abs_diff_eq!(back.theta_tv, cfg.theta_tv, epsilon = 1e-15);
        assert_eq!(back.baffles.len(), cfg.baffles.len());
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut cfg = OpticalConfig::default();
        cfg.absorptivity.shell = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = OpticalConfig::default();
        cfg.led.position = Vec2::new(-1.0, 3.0);
        assert!(cfg.validate().is_err());
        let cfg = OpticalConfig {
            theta_s: 100f64.to_radians(),
            ..OpticalConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
