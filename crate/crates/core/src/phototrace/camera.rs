//! Focused camera behind the viewing surface.
//!
//! Columns of the camera profile are uniform in position along the touching
//! surface. Each touching-surface point `x` has a chief ray: the refracted
//! path from `x` through the viewing surface to the aperture centre. Light
//! scattered at a contact is collected by next-event estimation along that
//! path; any other ray crossing the aperture is binned by matching its
//! arrival direction against the chief-ray directions.

use super::scene::Scene2D;
use super::TraceError;
use crate::geom::{Segment, Vec2};
use crate::optics::{fresnel_reflectance, Crossing};

const TABLE_SAMPLES: usize = 2048;
const BISECT_ITERS: usize = 64;

#[derive(Debug, Clone, Copy)]
struct ChiefSample {
    /// Arrival direction relative to the camera axis (rad); NaN if unobservable.
    rel_angle: f64,
    /// Fraction of Lambertian scatter from this point reaching the aperture.
    weight: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct CameraModel {
    length: f64,
    samples: Vec<ChiefSample>,
    aperture: Segment,
    axis: Vec2,
    half_fov: f64,
    /// Valid sample index range, monotone in `rel_angle`.
    valid: (usize, usize),
    increasing: bool,
}

/// Refracted path through the viewing surface.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ChiefPath {
    pub exit: Vec2,
    /// In-medium unit direction.
    pub inside: Vec2,
    /// Air-side unit direction.
    pub outside: Vec2,
}

impl CameraModel {
    pub(crate) fn placeholder() -> Self {
        Self {
            length: 1.0,
            samples: Vec::new(),
            aperture: Segment::new(Vec2::default(), Vec2::new(1.0, 0.0)),
            axis: Vec2::new(1.0, 0.0),
            half_fov: 0.0,
            valid: (0, 0),
            increasing: true,
        }
    }

    pub(crate) fn build(scene: &Scene2D) -> Result<Self, TraceError> {
        let cam = scene.config.camera;
        let axis = Vec2::from_angle(cam.axis);
        let half = axis.perp() * (0.5 * cam.aperture);
        let aperture = Segment::new(cam.position - half, cam.position + half);
        let length = scene.touching_length();
        let touching = scene.touching().segment;

        let mut samples = Vec::with_capacity(TABLE_SAMPLES);
        for k in 0..TABLE_SAMPLES {
            let x = length * (k as f64 + 0.5) / TABLE_SAMPLES as f64;
            let p = touching.point_at(x / length);
            samples.push(Self::sample(scene, p, cam.position, &aperture, axis, 0.5 * cam.fov));
        }

        let first = samples.iter().position(|s| s.rel_angle.is_finite());
        let last = samples.iter().rposition(|s| s.rel_angle.is_finite());
        let (first, last) = match (first, last) {
            (Some(f), Some(l)) if l > f => (f, l),
            _ => {
                return Err(TraceError::InvalidScene(
                    "camera cannot observe the touching surface".into(),
                ))
            }
        };
        let increasing = samples[last].rel_angle > samples[first].rel_angle;
        for w in samples[first..=last].windows(2) {
            let (a, b) = (w[0].rel_angle, w[1].rel_angle);
            let ok = if increasing { b > a } else { b < a };
            if !ok {
                return Err(TraceError::InvalidScene(
                    "touching surface does not map monotonically onto the camera".into(),
                ));
            }
        }
        Ok(Self {
            length,
            samples,
            aperture,
            axis,
            half_fov: 0.5 * cam.fov,
            valid: (first, last),
            increasing,
        })
    }

    fn sample(scene: &Scene2D, p: Vec2, centre: Vec2, aperture: &Segment, axis: Vec2, half_fov: f64) -> ChiefSample {
        let invalid = ChiefSample {
            rel_angle: f64::NAN,
            weight: 0.0,
        };
        let Some(chief) = refracted_path(scene, p, centre) else {
            return invalid;
        };
        let rel = relative_angle(axis, -chief.outside);
        if rel.abs() > half_fov {
            return invalid;
        }
        if scene.occluded(p, chief.exit) {
            // the pixel still looks this way, it just sees a wall
            return ChiefSample { rel_angle: rel, weight: 0.0 };
        }
        let ends = [aperture.a, aperture.b].map(|e| refracted_path(scene, p, e));
        let weight = match ends {
            [Some(a), Some(b)] => {
                let t = scene.touching().segment.direction();
                let mut w = 0.5 * (a.inside.dot(t) - b.inside.dot(t)).abs();
                if scene.fresnel {
                    let n_out = -scene.viewing().segment.left_normal();
                    let inc = chief.inside.dot(n_out).clamp(-1.0, 1.0).acos();
                    w *= 1.0 - fresnel_reflectance(inc, scene.config.media, Crossing::Exiting);
                }
                w
            }
            _ => 0.0,
        };
        ChiefSample { rel_angle: rel, weight }
    }

    fn lookup(&self, x: f64) -> (usize, usize, f64) {
        let n = self.samples.len();
        let u = (x / self.length * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        (i, i + 1, u - i as f64)
    }

    /// Lambertian fraction of light scattered at `x` that reaches the aperture.
    pub(crate) fn nee_weight(&self, x: f64) -> f64 {
        let (i, j, f) = self.lookup(x);
        let (a, b) = (self.samples[i].weight, self.samples[j].weight);
        if a == 0.0 || b == 0.0 {
            // no interpolation across an observability edge
            return if f < 0.5 { a } else { b };
        }
        a + (b - a) * f
    }

    /// Touching-surface position imaged by a ray leaving the viewing surface
    /// at `from` along `dir`, if it enters the aperture inside the field of view.
    pub(crate) fn image_position(&self, from: Vec2, dir: Vec2) -> Option<f64> {
        self.aperture.intersect(from, dir)?;
        let rel = relative_angle(self.axis, -dir);
        if rel.abs() > self.half_fov {
            return None;
        }
        let s = &self.samples[self.valid.0..=self.valid.1];
        let key = |a: f64| if self.increasing { a } else { -a };
        let target = key(rel);
        if target < key(s[0].rel_angle) || target > key(s[s.len() - 1].rel_angle) {
            return None;
        }
        let hi = s.partition_point(|c| key(c.rel_angle) < target).clamp(1, s.len() - 1);
        let lo = hi - 1;
        let (a, b) = (key(s[lo].rel_angle), key(s[hi].rel_angle));
        let f = if b > a { (target - a) / (b - a) } else { 0.0 };
        let k = (self.valid.0 + lo) as f64 + f;
        Some(((k + 0.5) / self.samples.len() as f64 * self.length).clamp(0.0, self.length))
    }

    /// Column index for a touching-surface position.
    pub(crate) fn column(&self, x: f64, pixels: usize) -> usize {
        ((x / self.length * pixels as f64) as usize).min(pixels - 1)
    }
}

/// Signed angle from `axis` to `v`.
fn relative_angle(axis: Vec2, v: Vec2) -> f64 {
    axis.cross(v).atan2(axis.dot(v))
}

/// Refracted path from `p` inside the medium to `target` in air through the
/// viewing surface, found by bisection on the tangential Snell mismatch.
pub(crate) fn refracted_path(scene: &Scene2D, p: Vec2, target: Vec2) -> Option<ChiefPath> {
    let view = scene.viewing().segment;
    let t = view.direction();
    let n_out = -view.left_normal();
    let (n_m, n_a) = (scene.config.media.n_medium, scene.config.media.n_air);
    let mismatch = |s: f64| {
        let q = view.point_at(s);
        let inside = (q - p).normalized();
        let outside = (target - q).normalized();
        n_m * inside.dot(t) - n_a * outside.dot(t)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let (f_lo, f_hi) = (mismatch(lo), mismatch(hi));
    if !(f_lo <= 0.0 && f_hi >= 0.0) {
        return None;
    }
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if mismatch(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    let exit = view.point_at(s);
    let inside = (exit - p).normalized();
    let outside = (target - exit).normalized();
    if inside.dot(n_out) <= 0.0 || outside.dot(n_out) <= 0.0 || !inside.x.is_finite() {
        return None;
    }
    Some(ChiefPath {
        exit,
        inside,
        outside,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::OpticalConfig;
    use crate::phototrace::Sources;

    fn scene() -> Scene2D {
        Scene2D::from_config(OpticalConfig::default(), Sources::default()).unwrap()
    }

    #[test]
    fn chief_path_obeys_snell() {
        let s = scene();
        let p = Vec2::new(4.0, 0.0);
        let c = s.config.camera.position;
        let path = refracted_path(&s, p, c).unwrap();
        let t = s.viewing().segment.direction();
        let lhs = 1.45 * path.inside.dot(t);
        let rhs = path.outside.dot(t);
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn default_camera_sees_whole_touching_surface() {
        let s = scene();
        let cam = &s.camera;
        assert_eq!(cam.valid, (0, TABLE_SAMPLES - 1));
        for k in 0..=20 {
            let x = 12.0 * k as f64 / 20.0;
            assert!(cam.nee_weight(x) > 0.0, "x = {x}");
        }
    }

    #[test]
    fn image_position_inverts_chief_rays() {
        let s = scene();
        let c = s.config.camera.position;
        for x in [0.5, 3.0, 6.0, 9.0, 11.5] {
            let path = refracted_path(&s, Vec2::new(x, 0.0), c).unwrap();
            let back = s.camera.image_position(path.exit, path.outside).unwrap();
            assert!((back - x).abs() < 0.01, "{x} -> {back}");
        }
    }
}
