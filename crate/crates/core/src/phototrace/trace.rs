//! Forward path tracer.
//!
//! Ray `i` of a trace draws from its own ChaCha8 stream (`key`, stream `i`),
//! so any subset of ray indices can be traced independently. Radiance is
//! accumulated in 128-bit fixed point, which makes accumulation exact,
//! order-free and additive across batches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::contact::{ContactSpec, Rgb};
use super::scene::{Scene2D, SurfaceKind};
use super::TraceError;
use crate::geom::Vec2;
use crate::optics::{fresnel_reflectance, Crossing, LedPose};

pub const BOUNCE_CAP: usize = 32;
const ROULETTE_FLOOR: f64 = 1e-6;
const FIXED_SCALE: f64 = (1u64 << 40) as f64;
const BATCH: u64 = 4096;

/// Seed of a trace: a stream key and the index of the first ray.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RaySeed {
    pub key: u64,
    pub offset: u64,
}

impl RaySeed {
    pub fn new(key: u64) -> Self {
        Self { key, offset: 0 }
    }

    /// Seeds for the first `n` rays and for everything after them.
    pub fn split_at(self, n: u64) -> (RaySeed, RaySeed) {
        (
            self,
            RaySeed {
                key: self.key,
                offset: self.offset + n,
            },
        )
    }
}

impl From<u64> for RaySeed {
    fn from(key: u64) -> Self {
        Self::new(key)
    }
}

/// Transport unit: position, unit direction, RGB radiance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray2D {
    pub origin: Vec2,
    pub direction: Vec2,
    pub radiance: Rgb,
}

impl Ray2D {
    pub fn new(origin: Vec2, direction: Vec2, radiance: Rgb) -> Self {
        debug_assert!((direction.norm() - 1.0).abs() < 1e-9);
        debug_assert!(radiance.iter().all(|c| *c >= 0.0));
        Self {
            origin,
            direction,
            radiance,
        }
    }
}

/// Per-column RGB radiance collected by the camera.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CameraProfile {
    pixel_count: usize,
    ray_count: u64,
    acc: Vec<[u128; 3]>,
    emitted: [u128; 3],
}

impl CameraProfile {
    fn empty(pixel_count: usize) -> Self {
        Self {
            pixel_count,
            ray_count: 0,
            acc: vec![[0; 3]; pixel_count],
            emitted: [0; 3],
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.pixel_count
    }

    pub fn ray_count(&self) -> u64 {
        self.ray_count
    }

    /// Mean radiance per traced ray in column `i`.
    pub fn radiance(&self, i: usize) -> Rgb {
        let n = self.ray_count.max(1) as f64;
        self.acc[i].map(|v| v as f64 / FIXED_SCALE / n)
    }

    pub fn samples(&self) -> Vec<Rgb> {
        (0..self.pixel_count).map(|i| self.radiance(i)).collect()
    }

    /// Whether every accumulator is exactly zero.
    pub fn is_dark(&self) -> bool {
        self.acc.iter().all(|c| *c == [0; 3])
    }

    /// Sum of all column radiance, per channel.
    pub fn total_radiance(&self) -> Rgb {
        let n = self.ray_count.max(1) as f64;
        let mut t = [0u128; 3];
        for c in &self.acc {
            for k in 0..3 {
                t[k] += c[k];
            }
        }
        t.map(|v| v as f64 / FIXED_SCALE / n)
    }

    /// Source radiance emitted per ray, per channel.
    pub fn total_emitted(&self) -> Rgb {
        let n = self.ray_count.max(1) as f64;
        self.emitted.map(|v| v as f64 / FIXED_SCALE / n)
    }

    /// Combine traces of disjoint ray ranges.
    pub fn merge(&self, other: &CameraProfile) -> Result<CameraProfile, TraceError> {
        if self.pixel_count != other.pixel_count {
            return Err(TraceError::ProfileMismatch(self.pixel_count, other.pixel_count));
        }
        let mut out = self.clone();
        out.absorb(other);
        Ok(out)
    }

    fn absorb(&mut self, other: &CameraProfile) {
        self.ray_count += other.ray_count;
        for (a, b) in self.acc.iter_mut().zip(&other.acc) {
            for k in 0..3 {
                a[k] += b[k];
            }
        }
        for k in 0..3 {
            self.emitted[k] += other.emitted[k];
        }
    }

    fn deposit(&mut self, col: usize, rad: Rgb) {
        for (a, r) in self.acc[col].iter_mut().zip(rad) {
            *a += to_fixed(r);
        }
    }

    /// `column,r,g,b` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("column,r,g,b\n");
        for (i, v) in self.samples().iter().enumerate() {
            s.push_str(&format!("{i},{:e},{:e},{:e}\n", v[0], v[1], v[2]));
        }
        s
    }
}

fn to_fixed(v: f64) -> u128 {
    if v > 0.0 {
        (v * FIXED_SCALE).round() as u128
    } else {
        0
    }
}

/// Trace `rays` rays starting at `seed.offset` and bin them into `pixels`
/// columns spanning the touching surface.
pub fn trace(
    scene: &Scene2D,
    contact: &ContactSpec,
    seed: impl Into<RaySeed>,
    rays: u64,
    pixels: usize,
) -> Result<CameraProfile, TraceError> {
    let seed = seed.into();
    if rays == 0 {
        return Err(TraceError::ZeroRays);
    }
    if pixels == 0 {
        return Err(TraceError::ZeroPixels);
    }
    contact.validate(scene.touching_length())?;
    let base = ChaCha8Rng::seed_from_u64(seed.key);
    let batches = rays.div_ceil(BATCH);
    let run = |b: u64| {
        let lo = seed.offset + b * BATCH;
        let hi = (lo + BATCH).min(seed.offset + rays);
        let mut prof = CameraProfile::empty(pixels);
        let mut rng = base.clone();
        for i in lo..hi {
            rng.set_stream(i);
            rng.set_word_pos(0);
            trace_one(scene, contact, &mut rng, &mut prof);
        }
        prof.ray_count = hi - lo;
        prof
    };

    #[cfg(feature = "parallel")]
    let parts: Vec<CameraProfile> = {
        use rayon::prelude::*;
        (0..batches).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<CameraProfile> = (0..batches).map(run).collect();

    let mut out = CameraProfile::empty(pixels);
    for p in &parts {
        out.absorb(p);
    }
    Ok(out)
}

fn emit(scene: &Scene2D, contact: &ContactSpec, rng: &mut ChaCha8Rng) -> Option<(Ray2D, f64)> {
    let src = scene.sources;
    if rng.random::<f64>() < 0.5 {
        let led = scene.config.led;
        let tilt = led.tilt + (2.0 * rng.random::<f64>() - 1.0) * led.half_angle;
        let power = 2.0 * src.led_intensity;
        Some((Ray2D::new(led.position, LedPose::direction(tilt), [power; 3]), power))
    } else {
        let power = 2.0 * src.ambient_intensity;
        let touching = scene.touching().segment;
        let len = touching.length();
        let x = rng.random::<f64>() * len;
        let outside = (rng.random::<f64>() - 0.5) * std::f64::consts::PI;
        if contact.albedo_at(x).is_some() {
            // the contacting object shadows this patch
            return None;
        }
        let r = (outside.sin() / scene.config.media.ratio()).asin();
        let n = touching.left_normal();
        let t = touching.direction();
        let dir = n * r.cos() + t * r.sin();
        let mut rad = [power; 3];
        if scene.fresnel {
            let f = 1.0 - fresnel_reflectance(outside.abs(), scene.config.media, Crossing::Entering);
            rad = rad.map(|v| v * f);
        }
        Some((Ray2D::new(touching.point_at(x / len), dir, rad), power))
    }
}

fn trace_one(scene: &Scene2D, contact: &ContactSpec, rng: &mut ChaCha8Rng, prof: &mut CameraProfile) {
    let pixels = prof.pixel_count;
    let Some((ray, power)) = emit(scene, contact, rng) else {
        // shadowed ambient rays still count as emitted
        let power = 2.0 * scene.sources.ambient_intensity;
        for k in 0..3 {
            prof.emitted[k] += to_fixed(power);
        }
        return;
    };
    for k in 0..3 {
        prof.emitted[k] += to_fixed(power);
    }
    let Ray2D {
        origin: mut pos,
        direction: mut dir,
        radiance: mut rad,
    } = ray;
    if power == 0.0 {
        return;
    }
    let floor = ROULETTE_FLOOR * power;
    let media = scene.config.media;
    let ratio = media.ratio();
    let touching_idx = scene.touching_index();
    let mut exclude = if pos.y == 0.0 && dir.y > 0.0 { Some(touching_idx) } else { None };
    let mut from_diffuse = false;

    for _ in 0..BOUNCE_CAP {
        let Some((idx, t, _)) = scene.nearest_hit(pos, dir, exclude) else {
            return;
        };
        let surf = scene.surface(idx);
        let hit = pos + dir * t;
        let inward = surf.segment.left_normal();
        pos = hit;
        exclude = Some(idx);
        match surf.kind {
            SurfaceKind::Absorber { absorptivity } => {
                if rng.random::<f64>() < absorptivity {
                    return;
                }
                dir = dir.reflect(inward);
                from_diffuse = false;
            }
            SurfaceKind::Touching => {
                let along = (hit - surf.segment.a).dot(surf.segment.direction());
                if let Some(albedo) = contact.albedo_at(along) {
                    for k in 0..3 {
                        rad[k] *= albedo[k];
                    }
                    let w = scene.camera.nee_weight(along);
                    if w > 0.0 {
                        prof.deposit(scene.camera.column(along, pixels), rad.map(|v| v * w));
                    }
                    let s = 2.0 * rng.random::<f64>() - 1.0;
                    dir = inward * (1.0 - s * s).sqrt() + surf.segment.direction() * s;
                    from_diffuse = true;
                } else {
                    match interface(dir, -inward, ratio, scene.fresnel, media, rng) {
                        Interface::Reflect => {
                            dir = dir.reflect(inward);
                            from_diffuse = false;
                        }
                        Interface::Exit(_) => return,
                    }
                }
            }
            SurfaceKind::Viewing => match interface(dir, -inward, ratio, scene.fresnel, media, rng) {
                Interface::Reflect => {
                    dir = dir.reflect(inward);
                    from_diffuse = false;
                }
                Interface::Exit(out) => {
                    if !from_diffuse {
                        if let Some(x) = scene.camera.image_position(hit, out) {
                            prof.deposit(scene.camera.column(x, pixels), rad);
                        }
                    }
                    return;
                }
            },
        }
        let peak = rad[0].max(rad[1]).max(rad[2]);
        if peak < floor {
            if peak == 0.0 || rng.random::<f64>() < 0.5 {
                return;
            }
            rad = rad.map(|v| v * 2.0);
        }
    }
}

enum Interface {
    Reflect,
    Exit(Vec2),
}

/// Dense-to-rare crossing with outward normal `n_out`.
fn interface(
    dir: Vec2,
    n_out: Vec2,
    ratio: f64,
    fresnel: bool,
    media: crate::optics::MediumPair,
    rng: &mut ChaCha8Rng,
) -> Interface {
    let cos_i = dir.dot(n_out).clamp(0.0, 1.0);
    let tangential = dir - n_out * cos_i;
    let s = ratio * tangential.norm();
    if s >= 1.0 {
        return Interface::Reflect;
    }
    if fresnel {
        let r = fresnel_reflectance(cos_i.acos(), media, Crossing::Exiting);
        if rng.random::<f64>() < r {
            return Interface::Reflect;
        }
    }
    Interface::Exit(tangential * ratio + n_out * (1.0 - s * s).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{Absorptivity, OpticalConfig};
    use crate::phototrace::Sources;

    fn scene(a: f64) -> Scene2D {
        let cfg = OpticalConfig {
            absorptivity: Absorptivity::uniform(a),
            ..OpticalConfig::default()
        };
        Scene2D::from_config(cfg, Sources::default()).unwrap()
    }

    #[test]
    fn rejects_zero_rays() {
        let s = scene(1.0);
        assert!(matches!(trace(&s, &ContactSpec::none(), 1, 0, 8), Err(TraceError::ZeroRays)));
    }

    #[test]
    fn ideal_no_contact_is_dark() {
        let s = scene(1.0);
        let p = trace(&s, &ContactSpec::none(), 3, 50_000, 64).unwrap();
        assert!(p.is_dark());
        assert_eq!(p.ray_count(), 50_000);
    }

    #[test]
    fn no_sources_is_dark() {
        let s = scene(0.9).with_sources(Sources {
            led_intensity: 0.0,
            ambient_intensity: 0.0,
        });
        let p = trace(&s, &ContactSpec::single(2.0, 8.0, [1.0; 3]), 3, 20_000, 32).unwrap();
        assert!(p.is_dark());
    }

    #[test]
    fn deterministic_and_mergeable() {
        let s = scene(0.9);
        let c = ContactSpec::single(3.0, 7.0, [0.8, 0.6, 0.4]);
        let a = trace(&s, &c, 11, 10_000, 48).unwrap();
        let b = trace(&s, &c, 11, 10_000, 48).unwrap();
        assert_eq!(a, b);
        let (s1, s2) = RaySeed::new(11).split_at(4_321);
        let h1 = trace(&s, &c, s1, 4_321, 48).unwrap();
        let h2 = trace(&s, &c, s2, 10_000 - 4_321, 48).unwrap();
        assert_eq!(h1.merge(&h2).unwrap(), a);
    }

    #[test]
    fn red_contact_lights_only_red() {
        let s = scene(1.0);
        let c = ContactSpec::single(4.0, 6.0, [1.0, 0.0, 0.0]);
        let p = trace(&s, &c, 5, 20_000, 60).unwrap();
        let mut lit = 0;
        for (i, v) in p.samples().iter().enumerate() {
            assert_eq!(v[1], 0.0);
            assert_eq!(v[2], 0.0);
            if v[0] > 0.0 {
                lit += 1;
                assert!((19..=30).contains(&i), "column {i} lit");
            }
        }
        assert!(lit > 0);
    }

    #[test]
    fn energy_bounded_by_emission() {
        let s = scene(0.5);
        let p = trace(&s, &ContactSpec::single(0.0, 12.0, [1.0; 3]), 2, 20_000, 32).unwrap();
        let (got, emitted) = (p.total_radiance(), p.total_emitted());
        for k in 0..3 {
            assert!(got[k] > 0.0 && got[k] <= emitted[k]);
        }
    }
}
