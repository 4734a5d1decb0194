//! Imprint-grid calibration: detect the grid of bright imprints, estimate
//! the pixel pitch from the corner imprints, and build a rectification map
//! onto an evenly spaced metric lattice.

use serde::{Deserialize, Serialize};

use crate::imaging::{connected_components, Connectivity, ContactMask, ImagingError, RectifyMap, SensorImage};

pub const DEFAULT_THRESHOLD: u8 = 60;

#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("too few imprints: found {found}, need {needed}")]
    TooFewImprints { found: usize, needed: usize },
    #[error("ambiguous ordering at imprint {imprint} (centroid {x:.2}, {y:.2}): {detail}")]
    AmbiguousOrdering {
        imprint: usize,
        x: f64,
        y: f64,
        detail: String,
    },
    #[error("degenerate detection: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub pitch_mm: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rows: 5,
            cols: 5,
            pitch_mm: 3.0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if self.rows < 2 || self.cols < 2 {
            return Err(CalibrationError::InvalidSpec("rows and cols must be at least 2".into()));
        }
        if !(self.pitch_mm > 0.0 && self.pitch_mm.is_finite()) {
            return Err(CalibrationError::InvalidSpec("pitch must be positive".into()));
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDetection {
    pub rows: usize,
    pub cols: usize,
    /// Sub-pixel centres `(x, y)`, row-major.
    pub centers: Vec<(f64, f64)>,
    /// Row-major indices of the top-left, top-right, bottom-left and
    /// bottom-right imprints.
    pub corner_indices: [usize; 4],
    /// Pixels per millimetre, averaged over the four grid edges.
    pub mean_pixel_pitch: f64,
    pitch_mm: f64,
}

impl GridDetection {
    pub fn center(&self, row: usize, col: usize) -> (f64, f64) {
        self.centers[row * self.cols + col]
    }

    /// Pixels between neighbouring imprints.
    pub fn px_per_pitch(&self) -> f64 {
        self.mean_pixel_pitch * self.pitch_mm
    }
}

struct Blob {
    x: f64,
    y: f64,
}

/// Threshold, label, and order the imprints.
pub fn detect_grid(img: &SensorImage, spec: &GridSpec, threshold: u8) -> Result<GridDetection, CalibrationError> {
    spec.validate()?;
    let (w, h) = img.dims();
    let mask = ContactMask::from_fn(w, h, |x, y| img.gray(x, y) > threshold as f64)?;
    let comps = connected_components(&mask, Connectivity::Eight);
    let needed = spec.count();
    if comps.len() < needed {
        return Err(CalibrationError::TooFewImprints {
            found: comps.len(),
            needed,
        });
    }
    let blobs: Vec<Blob> = comps[..needed]
        .iter()
        .map(|c| {
            let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
            for &(x, y) in &c.pixels {
                let g = img.gray(x, y);
                sw += g;
                sx += g * x as f64;
                sy += g * y as f64;
            }
            Blob { x: sx / sw, y: sy / sw }
        })
        .collect();

    let arg = |key: &dyn Fn(&Blob) -> f64, max: bool| {
        let mut best = 0;
        for (i, b) in blobs.iter().enumerate() {
            let better = if max { key(b) > key(&blobs[best]) } else { key(b) < key(&blobs[best]) };
            if better {
                best = i;
            }
        }
        best
    };
    let tl = arg(&|b| b.x + b.y, false);
    let br = arg(&|b| b.x + b.y, true);
    let tr = arg(&|b| b.x - b.y, true);
    let bl = arg(&|b| b.x - b.y, false);
    let corners = [tl, tr, bl, br];
    for i in 0..4 {
        for j in i + 1..4 {
            if corners[i] == corners[j] {
                return Err(CalibrationError::Degenerate("corner imprints are not distinct".into()));
            }
        }
    }
    let p = |i: usize| (blobs[i].x, blobs[i].y);
    let patch = Bilinear::new(p(tl), p(tr), p(bl), p(br));
    if patch.min_jacobian() <= 0.0 {
        return Err(CalibrationError::Degenerate("corner imprints are collinear or folded".into()));
    }

    let mut slots: Vec<Option<usize>> = vec![None; needed];
    for (i, b) in blobs.iter().enumerate() {
        let ambiguous = |detail: String| CalibrationError::AmbiguousOrdering {
            imprint: i,
            x: b.x,
            y: b.y,
            detail,
        };
        let (u, v) = patch
            .invert((b.x, b.y))
            .ok_or_else(|| ambiguous("grid coordinates do not converge".into()))?;
        let (gu, gv) = (u * (spec.cols - 1) as f64, v * (spec.rows - 1) as f64);
        let (col, row) = (gu.round(), gv.round());
        if (gu - col).abs() > 0.35 || (gv - row).abs() > 0.35 {
            return Err(ambiguous(format!("grid position ({gu:.2}, {gv:.2}) is between lattice sites")));
        }
        if col < 0.0 || row < 0.0 || col as usize >= spec.cols || row as usize >= spec.rows {
            return Err(ambiguous(format!("grid position ({gu:.2}, {gv:.2}) is outside the grid")));
        }
        let slot = row as usize * spec.cols + col as usize;
        if let Some(other) = slots[slot] {
            return Err(ambiguous(format!(
                "row {row}, col {col} already taken by imprint {other}"
            )));
        }
        slots[slot] = Some(i);
    }
    let order: Vec<usize> = slots.into_iter().map(|s| s.expect("every slot filled")).collect();
    let centers: Vec<(f64, f64)> = order.iter().map(|&i| p(i)).collect();
    let corner_indices = [0, spec.cols - 1, (spec.rows - 1) * spec.cols, needed - 1];

    let dist = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
    let c = |k: usize| centers[corner_indices[k]];
    let across = (spec.cols - 1) as f64 * spec.pitch_mm;
    let down = (spec.rows - 1) as f64 * spec.pitch_mm;
    let mean_pixel_pitch =
        (dist(c(0), c(1)) / across + dist(c(2), c(3)) / across + dist(c(0), c(2)) / down + dist(c(1), c(3)) / down)
            / 4.0;

    Ok(GridDetection {
        rows: spec.rows,
        cols: spec.cols,
        centers,
        corner_indices,
        mean_pixel_pitch,
        pitch_mm: spec.pitch_mm,
    })
}

/// Bilinear patch through four points at unit-square corners.
#[derive(Debug, Clone, Copy)]
struct Bilinear {
    p00: (f64, f64),
    p10: (f64, f64),
    p01: (f64, f64),
    p11: (f64, f64),
}

impl Bilinear {
    fn new(p00: (f64, f64), p10: (f64, f64), p01: (f64, f64), p11: (f64, f64)) -> Self {
        Self { p00, p10, p01, p11 }
    }

    fn eval(&self, u: f64, v: f64) -> (f64, f64) {
        let f = |a: f64, b: f64, c: f64, d: f64| a * (1.0 - u) * (1.0 - v) + b * u * (1.0 - v) + c * (1.0 - u) * v + d * u * v;
        (
            f(self.p00.0, self.p10.0, self.p01.0, self.p11.0),
            f(self.p00.1, self.p10.1, self.p01.1, self.p11.1),
        )
    }

    fn jacobian(&self, u: f64, v: f64) -> [[f64; 2]; 2] {
        let du = |a: f64, b: f64, c: f64, d: f64| (b - a) * (1.0 - v) + (d - c) * v;
        let dv = |a: f64, b: f64, c: f64, d: f64| (c - a) * (1.0 - u) + (d - b) * u;
        [
            [du(self.p00.0, self.p10.0, self.p01.0, self.p11.0), dv(self.p00.0, self.p10.0, self.p01.0, self.p11.0)],
            [du(self.p00.1, self.p10.1, self.p01.1, self.p11.1), dv(self.p00.1, self.p10.1, self.p01.1, self.p11.1)],
        ]
    }

    fn min_jacobian(&self) -> f64 {
        [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
            .iter()
            .map(|&(u, v)| {
                let j = self.jacobian(u, v);
                j[0][0] * j[1][1] - j[0][1] * j[1][0]
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Newton inverse; `None` if it fails to converge.
    fn invert(&self, p: (f64, f64)) -> Option<(f64, f64)> {
        let (mut u, mut v) = (0.5, 0.5);
        for _ in 0..50 {
            let q = self.eval(u, v);
            let (rx, ry) = (q.0 - p.0, q.1 - p.1);
            if rx.hypot(ry) < 1e-10 {
                return Some((u, v));
            }
            let j = self.jacobian(u, v);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() < 1e-12 {
                return None;
            }
            u -= (j[1][1] * rx - j[0][1] * ry) / det;
            v -= (-j[1][0] * rx + j[0][0] * ry) / det;
            if !(u.is_finite() && v.is_finite()) {
                return None;
            }
        }
        let q = self.eval(u, v);
        ((q.0 - p.0).hypot(q.1 - p.1) < 1e-6).then_some((u, v))
    }
}

/// Destination position of imprint `(row, col)` in a map built at
/// `out_resolution` pixels per millimetre.
pub fn lattice_point(spec: &GridSpec, out_resolution: f64, row: usize, col: usize) -> (f64, f64) {
    let s = spec.pitch_mm * out_resolution;
    let m = 0.5 * s;
    (m + col as f64 * s, m + row as f64 * s)
}

/// Piecewise-bilinear map from the even lattice onto the detected centres,
/// extrapolated from the boundary cells into a half-pitch margin.
pub fn build_rectify_map(
    det: &GridDetection,
    spec: &GridSpec,
    out_resolution: f64,
    source: (usize, usize),
) -> Result<RectifyMap, CalibrationError> {
    spec.validate()?;
    if det.rows != spec.rows || det.cols != spec.cols || det.centers.len() != spec.count() {
        return Err(CalibrationError::InvalidSpec("detection does not match the grid spec".into()));
    }
    if !(out_resolution > 0.0 && out_resolution.is_finite()) {
        return Err(CalibrationError::InvalidSpec("output resolution must be positive".into()));
    }
    let cells: Vec<Bilinear> = (0..spec.rows - 1)
        .flat_map(|i| (0..spec.cols - 1).map(move |j| (i, j)))
        .map(|(i, j)| {
            Bilinear::new(
                det.center(i, j),
                det.center(i, j + 1),
                det.center(i + 1, j),
                det.center(i + 1, j + 1),
            )
        })
        .collect();
    for (k, c) in cells.iter().enumerate() {
        if c.min_jacobian() <= 0.0 {
            return Err(CalibrationError::Degenerate(format!(
                "grid cell {} is collinear or folded",
                k
            )));
        }
    }
    let s = spec.pitch_mm * out_resolution;
    let m = 0.5 * s;
    let width = ((spec.cols - 1) as f64 * s + 2.0 * m).round() as usize + 1;
    let height = ((spec.rows - 1) as f64 * s + 2.0 * m).round() as usize + 1;
    let mut map = RectifyMap::from_fn(source, (width, height), |x, y| {
        let gu = (x as f64 - m) / s;
        let gv = (y as f64 - m) / s;
        let j = (gu.floor().max(0.0) as usize).min(spec.cols - 2);
        let i = (gv.floor().max(0.0) as usize).min(spec.rows - 2);
        let (sx, sy) = cells[i * (spec.cols - 1) + j].eval(gu - j as f64, gv - i as f64);
        Some([sx, sy])
    })?;
    map.resolution = Some(out_resolution);
    Ok(map)
}

/// Largest distance between imprints re-detected in a rectified image and
/// their even-lattice positions, pixels.
pub fn lattice_residual(rectified: &SensorImage, spec: &GridSpec, out_resolution: f64, threshold: u8) -> Result<f64, CalibrationError> {
    let det = detect_grid(rectified, spec, threshold)?;
    let mut worst: f64 = 0.0;
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let (x, y) = det.center(r, c);
            let (lx, ly) = lattice_point(spec, out_resolution, r, c);
            worst = worst.max((x - lx).hypot(y - ly));
        }
    }
    Ok(worst)
}

/// Raw-to-ideal distortions for synthetic grids, about a centre point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticWarp {
    Identity,
    /// In-plane rotation, degrees.
    Rotation(f64),
    AnisotropicScale(f64, f64),
    /// Smooth cubic distortion with strength `k` per squared pixel radius.
    Polynomial(f64),
}

impl SyntheticWarp {
    /// Map a raw-image point to the ideal plane.
    pub fn to_ideal(&self, x: f64, y: f64, center: (f64, f64)) -> (f64, f64) {
        let (dx, dy) = (x - center.0, y - center.1);
        let (ix, iy) = match *self {
            Self::Identity => (dx, dy),
            Self::Rotation(deg) => {
                let (s, c) = (-deg.to_radians()).sin_cos();
                (c * dx - s * dy, s * dx + c * dy)
            }
            Self::AnisotropicScale(sx, sy) => (dx / sx, dy / sy),
            Self::Polynomial(k) => {
                let r2 = dx * dx + dy * dy;
                (dx * (1.0 + k * r2) + 2e-4 * dx * dy, dy * (1.0 + k * r2))
            }
        };
        (ix + center.0, iy + center.1)
    }
}

/// Synthetic imprint-grid image for tests and demos.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticGrid {
    pub spec: GridSpec,
    pub px_per_mm: f64,
    /// Ideal-plane pixel position of imprint (0, 0).
    pub origin: (f64, f64),
    pub disc_radius_mm: f64,
    pub width: usize,
    pub height: usize,
    pub background: u8,
    pub peak: u8,
}

impl SyntheticGrid {
    /// Grid centred in a `width x height` frame.
    pub fn centered(spec: GridSpec, px_per_mm: f64, width: usize, height: usize) -> Self {
        let span_x = (spec.cols - 1) as f64 * spec.pitch_mm * px_per_mm;
        let span_y = (spec.rows - 1) as f64 * spec.pitch_mm * px_per_mm;
        Self {
            spec,
            px_per_mm,
            origin: ((width as f64 - 1.0 - span_x) / 2.0, (height as f64 - 1.0 - span_y) / 2.0),
            disc_radius_mm: 0.8,
            width,
            height,
            background: 6,
            peak: 220,
        }
    }

    /// Ideal-plane pixel position of imprint `(row, col)`.
    pub fn ideal_center(&self, row: usize, col: usize) -> (f64, f64) {
        let s = self.spec.pitch_mm * self.px_per_mm;
        (self.origin.0 + col as f64 * s, self.origin.1 + row as f64 * s)
    }

    /// Render with `to_ideal` mapping raw-image coordinates to the ideal
    /// plane (the inverse of the lens/pose warp). 4x4 supersampled.
    pub fn render(&self, to_ideal: impl Fn(f64, f64) -> (f64, f64)) -> Result<SensorImage, ImagingError> {
        const SS: usize = 4;
        let s = self.spec.pitch_mm * self.px_per_mm;
        let r = self.disc_radius_mm * self.px_per_mm;
        let (bg, pk) = (self.background as f64, self.peak as f64);
        SensorImage::from_fn(self.width, self.height, |x, y| {
            let mut hit = 0;
            for a in 0..SS {
                for b in 0..SS {
                    let px = x as f64 - 0.5 + (a as f64 + 0.5) / SS as f64;
                    let py = y as f64 - 0.5 + (b as f64 + 0.5) / SS as f64;
                    let (ix, iy) = to_ideal(px, py);
                    let gu = ((ix - self.origin.0) / s).round();
                    let gv = ((iy - self.origin.1) / s).round();
                    if gu < 0.0 || gv < 0.0 || gu as usize >= self.spec.cols || gv as usize >= self.spec.rows {
                        continue;
                    }
                    let (cx, cy) = (self.origin.0 + gu * s, self.origin.1 + gv * s);
                    if (ix - cx).hypot(iy - cy) <= r {
                        hit += 1;
                    }
                }
            }
            let f = hit as f64 / (SS * SS) as f64;
            [(bg + (pk - bg) * f).round() as u8; 3]
        })
    }
}
