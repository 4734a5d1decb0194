//! Minimal planar geometry for the sensor cross-section.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians counter-clockwise from +x.
    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Rotated by +90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Mirror a direction about a surface with unit normal `n`.
    pub fn reflect(self, n: Vec2) -> Vec2 {
        self - n * (2.0 * self.dot(n))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Directed line segment `a -> b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub const fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn direction(&self) -> Vec2 {
        (self.b - self.a).normalized()
    }

    /// Unit normal on the left of `a -> b`.
    pub fn left_normal(&self) -> Vec2 {
        self.direction().perp()
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        self.a + (self.b - self.a) * s
    }

    /// Ray/segment intersection. Returns `(t, s)` with the hit at
    /// `origin + t * dir` and `s` in `[0, 1]` the fraction along the segment.
    pub fn intersect(&self, origin: Vec2, dir: Vec2) -> Option<(f64, f64)> {
        let e = self.b - self.a;
        let denom = dir.cross(e);
        if denom.abs() < 1e-15 {
            return None;
        }
        let w = self.a - origin;
        let t = w.cross(e) / denom;
        let s = w.cross(dir) / denom;
        if t > 0.0 && (0.0..=1.0).contains(&s) {
            Some((t, s))
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_hits_segment_midpoint() {
        let seg = Segment::new(Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0));
        let (t, s) = seg
            .intersect(Vec2::new(1.0, 1.0), Vec2::new(0.0, -1.0))
            .unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!((s - 0.5).abs() < 1e-12);
        assert!(seg.intersect(Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)).is_none());
        assert!(seg.intersect(Vec2::new(3.0, 1.0), Vec2::new(0.0, -1.0)).is_none());
    }

    #[test]
    fn reflect_flips_normal_component() {
        let d = Vec2::new(1.0, -1.0).normalized();
        let r = d.reflect(Vec2::new(0.0, 1.0));
        assert!((r.x - d.x).abs() < 1e-15 && (r.y + d.y).abs() < 1e-15);
    }
}
