use serde::{Deserialize, Serialize};

use super::TraceError;

pub type Rgb = [f64; 3];

/// One contact patch along the touching surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactInterval {
    pub start_mm: f64,
    pub end_mm: f64,
    pub albedo: Rgb,
    /// Optional RGB multiplier sampled uniformly across the interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture: Option<Vec<Rgb>>,
}

impl ContactInterval {
    pub fn new(start_mm: f64, end_mm: f64, albedo: Rgb) -> Self {
        Self {
            start_mm,
            end_mm,
            albedo,
            texture: None,
        }
    }

    pub fn with_texture(mut self, texture: Vec<Rgb>) -> Self {
        self.texture = Some(texture);
        self
    }

    fn albedo_at(&self, x: f64) -> Rgb {
        match &self.texture {
            Some(tex) if !tex.is_empty() => {
                let f = ((x - self.start_mm) / (self.end_mm - self.start_mm)).clamp(0.0, 1.0);
                let k = ((f * tex.len() as f64) as usize).min(tex.len() - 1);
                let t = tex[k];
                [self.albedo[0] * t[0], self.albedo[1] * t[1], self.albedo[2] * t[2]]
            }
            _ => self.albedo,
        }
    }
}

/// Contact state of one cross-section: where the air gap is gone.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSpec {
    pub intervals: Vec<ContactInterval>,
}

impl ContactSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn single(start_mm: f64, end_mm: f64, albedo: Rgb) -> Self {
        Self {
            intervals: vec![ContactInterval::new(start_mm, end_mm, albedo)],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Intervals sorted, non-overlapping, inside `[0, length]`, albedo in `[0, 1]`.
    pub fn validate(&self, length: f64) -> Result<(), TraceError> {
        let mut prev_end = f64::NEG_INFINITY;
        let mut sorted: Vec<&ContactInterval> = self.intervals.iter().collect();
        sorted.sort_by(|a, b| a.start_mm.total_cmp(&b.start_mm));
        for iv in sorted {
            if !(iv.start_mm < iv.end_mm) {
                return Err(TraceError::InvalidContact(format!(
                    "interval [{}, {}] is empty or reversed",
                    iv.start_mm, iv.end_mm
                )));
            }
            if iv.start_mm < 0.0 || iv.end_mm > length {
                return Err(TraceError::InvalidContact(format!(
                    "interval [{}, {}] leaves the touching surface [0, {length}]",
                    iv.start_mm, iv.end_mm
                )));
            }
            if iv.start_mm < prev_end {
                return Err(TraceError::InvalidContact("intervals overlap".into()));
            }
            let in_unit = |c: &Rgb| c.iter().all(|v| (0.0..=1.0).contains(v));
            if !in_unit(&iv.albedo) || iv.texture.as_ref().is_some_and(|t| !t.iter().all(in_unit)) {
                return Err(TraceError::InvalidContact("albedo must lie in [0, 1]".into()));
            }
            prev_end = iv.end_mm;
        }
        Ok(())
    }

    /// Diffuse albedo at `x`, `None` where the air gap remains.
    pub fn albedo_at(&self, x: f64) -> Option<Rgb> {
        self.intervals
            .iter()
            .find(|iv| x >= iv.start_mm && x < iv.end_mm)
            .map(|iv| iv.albedo_at(x))
    }

    /// Columns whose footprint overlaps a contact interval, for a profile of
    /// `pixels` columns spanning `length` mm.
    pub fn column_support(&self, length: f64, pixels: usize) -> Vec<bool> {
        let mut lit = vec![false; pixels];
        for iv in &self.intervals {
            let a = (iv.start_mm / length * pixels as f64).floor().max(0.0) as usize;
            let b = ((iv.end_mm / length * pixels as f64).ceil() as usize).min(pixels);
            for c in lit.iter_mut().take(b).skip(a) {
                *c = true;
            }
        }
        lit
    }

    /// Build from one row of a column mask: runs of `true` become intervals
    /// aligned to column boundaries.
    pub fn from_columns(columns: &[bool], length: f64, albedo: Rgb) -> Self {
        let n = columns.len() as f64;
        let mut intervals = Vec::new();
        let mut start = None;
        for (i, &c) in columns.iter().chain(std::iter::once(&false)).enumerate() {
            match (c, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    intervals.push(ContactInterval::new(
                        s as f64 / n * length,
                        i as f64 / n * length,
                        albedo,
                    ));
                    start = None;
                }
                _ => {}
            }
        }
        Self { intervals }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_overlap_and_out_of_range() {
        let mut c = ContactSpec::single(1.0, 3.0, [1.0; 3]);
        c.intervals.push(ContactInterval::new(2.0, 4.0, [1.0; 3]));
        assert!(c.validate(12.0).is_err());
        assert!(ContactSpec::single(-1.0, 3.0, [1.0; 3]).validate(12.0).is_err());
        assert!(ContactSpec::single(10.0, 13.0, [1.0; 3]).validate(12.0).is_err());
        assert!(ContactSpec::single(1.0, 3.0, [1.5, 0.0, 0.0]).validate(12.0).is_err());
        assert!(ContactSpec::single(1.0, 3.0, [1.0; 3]).validate(12.0).is_ok());
    }

    #[test]
    fn columns_roundtrip() {
        let cols = [false, true, true, false, true, false];
        let spec = ContactSpec::from_columns(&cols, 12.0, [1.0; 3]);
        assert_eq!(spec.intervals.len(), 2);
        assert_eq!(spec.column_support(12.0, 6), cols.to_vec());
        assert_eq!(spec.albedo_at(2.5), Some([1.0; 3]));
        assert_eq!(spec.albedo_at(6.5), None);
    }

    #[test]
    fn texture_modulates_albedo() {
        let iv = ContactInterval::new(0.0, 4.0, [1.0, 0.5, 1.0])
            .with_texture(vec![[1.0, 1.0, 1.0], [0.0, 1.0, 0.5]]);
        let spec = ContactSpec { intervals: vec![iv] };
        assert_eq!(spec.albedo_at(1.0), Some([1.0, 0.5, 1.0]));
        assert_eq!(spec.albedo_at(3.0), Some([0.0, 0.5, 0.5]));
    }
}
