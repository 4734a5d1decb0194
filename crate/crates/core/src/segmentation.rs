//! Frame-differencing contact segmentation.
//!
//! A reference is averaged from the first `N` no-contact frames. Each new
//! frame is differenced against it in signed 16-bit space and a pixel is
//! marked as contact when any of four brightness conditions holds:
//!
//! 1. mean channel increase above `t0`
//! 2. at least one channel above `t1`
//! 3. at least two channels above `t2`
//! 4. all three channels above `t3`

use serde::{Deserialize, Serialize};

use crate::imaging::{connected_components, BoundingBox, Connectivity, ContactMask, ImagingError, SensorImage};

pub const DEFAULT_REFERENCE_FRAMES: usize = 10;
pub const DEFAULT_MIN_COMPONENT: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum SegmentationError {
    #[error("reference needs at least one frame")]
    ZeroFrames,
    #[error("need {needed} reference frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },
    #[error("frame {index} is {got:?}, expected {expected:?}")]
    DimensionMismatch {
        index: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// Gray-level thresholds on the positive frame difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t0: u16,
    pub t1: u16,
    pub t2: u16,
    pub t3: u16,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            t0: 25,
            t1: 20,
            t2: 30,
            t3: 40,
        }
    }
}

impl Thresholds {
    /// Componentwise `self >= other`.
    pub fn dominates(&self, other: &Thresholds) -> bool {
        self.t0 >= other.t0 && self.t1 >= other.t1 && self.t2 >= other.t2 && self.t3 >= other.t3
    }
}

/// Which of the four conditions a signed RGB delta satisfies.
pub fn conditions(delta: [i16; 3], th: &Thresholds) -> [bool; 4] {
    let sum: i32 = delta.iter().map(|&d| d as i32).sum();
    let above = |t: u16| delta.iter().filter(|&&d| d as i32 > t as i32).count();
    [
        sum > 3 * th.t0 as i32,
        above(th.t1) >= 1,
        above(th.t2) >= 2,
        above(th.t3) == 3,
    ]
}

pub fn is_contact(delta: [i16; 3], th: &Thresholds) -> bool {
    conditions(delta, th).iter().any(|c| *c)
}

/// Frozen no-contact reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceState {
    width: usize,
    height: usize,
    frame_count: usize,
    mean: Vec<f64>,
    rounded: Vec<i16>,
}

impl ReferenceState {
    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Real-valued per-channel mean, row-major RGB.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// The reference rounded to 8 bits.
    pub fn image(&self) -> SensorImage {
        let px = self.rounded.iter().map(|&v| v as u8).collect();
        SensorImage::from_raw(self.width, self.height, px).expect("reference dimensions are valid")
    }
}

/// Per-pixel, per-channel mean of the first `n` frames.
pub fn build_reference(frames: &[SensorImage], n: usize) -> Result<ReferenceState, SegmentationError> {
    if n == 0 {
        return Err(SegmentationError::ZeroFrames);
    }
    if frames.len() < n {
        return Err(SegmentationError::TooFewFrames {
            needed: n,
            got: frames.len(),
        });
    }
    let dims = frames[0].dims();
    let mut sum = vec![0u32; dims.0 * dims.1 * 3];
    for (index, f) in frames[..n].iter().enumerate() {
        if f.dims() != dims {
            return Err(SegmentationError::DimensionMismatch {
                index,
                expected: dims,
                got: f.dims(),
            });
        }
        for (s, &v) in sum.iter_mut().zip(f.as_raw()) {
            *s += v as u32;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|&s| s as f64 / n as f64).collect();
    let rounded = mean.iter().map(|&m| m.round() as i16).collect();
    Ok(ReferenceState {
        width: dims.0,
        height: dims.1,
        frame_count: n,
        mean,
        rounded,
    })
}

/// Signed difference `frame - reference` against the 8-bit reference.
pub fn difference(frame: &SensorImage, reference: &ReferenceState) -> Result<Vec<[i16; 3]>, SegmentationError> {
    if frame.dims() != reference.dims() {
        return Err(SegmentationError::DimensionMismatch {
            index: 0,
            expected: reference.dims(),
            got: frame.dims(),
        });
    }
    Ok(frame
        .as_raw()
        .chunks_exact(3)
        .zip(reference.rounded.chunks_exact(3))
        .map(|(f, r)| [0, 1, 2].map(|k| f[k] as i16 - r[k]))
        .collect())
}

pub fn segment(frame: &SensorImage, reference: &ReferenceState, th: &Thresholds) -> Result<ContactMask, SegmentationError> {
    let diff = difference(frame, reference)?;
    let bits = diff.iter().map(|&d| is_contact(d, th)).collect();
    Ok(ContactMask::from_bits(frame.width(), frame.height(), bits)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentStats {
    pub pixel_count: usize,
    pub centroid: (f64, f64),
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactStats {
    pub pixel_count: usize,
    pub coverage: f64,
    /// `None` for an empty mask.
    pub centroid: Option<(f64, f64)>,
    pub components: Vec<ComponentStats>,
}

pub fn stats(mask: &ContactMask) -> ContactStats {
    let (w, h) = mask.dims();
    let (mut n, mut sx, mut sy) = (0usize, 0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                n += 1;
                sx += x as f64;
                sy += y as f64;
            }
        }
    }
    let components = connected_components(mask, Connectivity::Eight)
        .into_iter()
        .map(|c| ComponentStats {
            pixel_count: c.pixel_count,
            centroid: c.centroid,
            bbox: c.bbox,
        })
        .collect();
    ContactStats {
        pixel_count: n,
        coverage: n as f64 / (w * h) as f64,
        centroid: (n > 0).then(|| (sx / n as f64, sy / n as f64)),
        components,
    }
}

/// Drop 8-connected components smaller than `min_component` pixels.
pub fn denoise(mask: &ContactMask, min_component: usize) -> ContactMask {
    if min_component == 0 {
        return mask.clone();
    }
    let mut out = ContactMask::new(mask.width(), mask.height()).expect("mask dimensions are valid");
    for c in connected_components(mask, Connectivity::Eight) {
        if c.pixel_count >= min_component {
            for (x, y) in c.pixels {
                out.set(x, y, true);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(v: [u8; 3]) -> SensorImage {
        SensorImage::from_fn(4, 3, |_, _| v).unwrap()
    }

    #[test]
    fn paper_threshold_examples() {
        let th = Thresholds::default();
        assert!(is_contact([30, 30, 30], &th));
        assert_eq!(conditions([30, 30, 30], &th), [true, true, false, false]);
        assert!(!is_contact([0, 0, 0], &th));
        assert_eq!(conditions([0, 0, 21], &th), [false, true, false, false]);
        assert!(!is_contact([0, 19, 19], &th));
        assert!(!is_contact([-100, -50, 0], &th));
    }

    #[test]
    fn each_condition_fires_alone() {
        let th = Thresholds {
            t0: 10,
            t1: 100,
            t2: 50,
            t3: 20,
        };
        assert_eq!(conditions([11, 11, 11], &th), [true, false, false, false]);
        let th = Thresholds::default();
        assert_eq!(conditions([21, 0, 0], &th), [false, true, false, false]);
        let th = Thresholds {
            t0: 100,
            t1: 100,
            t2: 10,
            t3: 100,
        };
        assert_eq!(conditions([11, 11, 0], &th), [false, false, true, false]);
        let th = Thresholds {
            t0: 100,
            t1: 100,
            t2: 100,
            t3: 10,
        };
        assert_eq!(conditions([11, 11, 11], &th), [false, false, false, true]);
    }

    #[test]
    fn reference_of_identical_and_alternating_frames() {
        let f = flat([7, 8, 9]);
        let r = build_reference(&vec![f.clone(); 10], 10).unwrap();
        assert_eq!(r.image(), f);
        let frames: Vec<_> = (0..10).map(|i| flat([if i % 2 == 0 { 0 } else { 10 }; 3])).collect();
        let r = build_reference(&frames, 10).unwrap();
        assert!(r.mean().iter().all(|&m| m == 5.0));
    }

    #[test]
    fn reference_errors() {
        assert!(matches!(
            build_reference(&[flat([0; 3])], 2),
            Err(SegmentationError::TooFewFrames { needed: 2, got: 1 })
        ));
        let odd = SensorImage::new(5, 3).unwrap();
        assert!(matches!(
            build_reference(&[flat([0; 3]), odd], 2),
            Err(SegmentationError::DimensionMismatch { index: 1, .. })
        ));
        assert!(build_reference(&[flat([0; 3])], 0).is_err());
    }

    #[test]
    fn reference_frame_segments_empty() {
        let frames: Vec<_> = (0..10).map(|i| flat([i as u8, 3, 200 - i as u8])).collect();
        let r = build_reference(&frames, 10).unwrap();
        let m = segment(&r.image(), &r, &Thresholds::default()).unwrap();
        assert!(m.is_empty());
        assert!(segment(&SensorImage::new(2, 2).unwrap(), &r, &Thresholds::default()).is_err());
    }

    #[test]
    fn stats_of_half_plane() {
        let m = ContactMask::from_fn(10, 4, |x, _| x < 5).unwrap();
        let s = stats(&m);
        assert_eq!(s.pixel_count, 20);
        assert_eq!(s.coverage, 0.5);
        assert_eq!(s.centroid, Some((2.0, 1.5)));
        assert_eq!(s.components.len(), 1);
        let e = stats(&ContactMask::new(3, 3).unwrap());
        assert_eq!((e.pixel_count, e.coverage, e.centroid), (0, 0.0, None));
    }

    #[test]
    fn denoise_keeps_only_large_blobs() {
        let m = ContactMask::from_fn(20, 20, |x, y| {
            (x < 3 && y < 3) || (x, y) == (10, 10) || (x, y) == (15, 2) || (x, y) == (2, 17)
        })
        .unwrap();
        assert_eq!(denoise(&m, 0), m);
        let d = denoise(&m, 4);
        assert_eq!(d.count(), 9);
        assert!(d.get(1, 1) && !d.get(10, 10));
    }
}
