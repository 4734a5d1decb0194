use serde::{Deserialize, Serialize};

use super::camera::CameraModel;
use super::TraceError;
use crate::geom::{Segment, Vec2};
use crate::optics::OpticalConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceKind {
    /// Medium/air interface where objects make contact.
    Touching,
    /// Medium/air interface facing the camera.
    Viewing,
    /// Black surface: absorbs with this probability, otherwise mirrors.
    Absorber { absorptivity: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surface {
    pub segment: Segment,
    pub kind: SurfaceKind,
}

/// Source strengths in arbitrary linear units (lux proxies).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sources {
    pub led_intensity: f64,
    pub ambient_intensity: f64,
}

impl Default for Sources {
    fn default() -> Self {
        Self {
            led_intensity: 430.0,
            ambient_intensity: 1000.0,
        }
    }
}

/// Sensor cross-section ready for tracing.
#[derive(Debug, Clone)]
pub struct Scene2D {
    pub config: OpticalConfig,
    /// Closed medium boundary in order.
    pub boundary: Vec<Surface>,
    /// Free-standing absorbers inside the medium (baffles).
    pub interior: Vec<Surface>,
    pub sources: Sources,
    /// Stochastic Fresnel reflection at the two interfaces.
    pub fresnel: bool,
    pub(crate) camera: CameraModel,
    touching: usize,
    viewing: usize,
}

impl Scene2D {
    /// Standard cross-section: touching, viewing, top wall, end wall, shell A,
    /// plus the configured baffles.
    pub fn from_config(config: OpticalConfig, sources: Sources) -> Result<Self, TraceError> {
        config.validate()?;
        let [t, v, top, end, shell] = config.boundary();
        let a = config.absorptivity;
        let boundary = vec![
            Surface { segment: t, kind: SurfaceKind::Touching },
            Surface { segment: v, kind: SurfaceKind::Viewing },
            Surface { segment: top, kind: SurfaceKind::Absorber { absorptivity: a.walls } },
            Surface { segment: end, kind: SurfaceKind::Absorber { absorptivity: a.walls } },
            Surface { segment: shell, kind: SurfaceKind::Absorber { absorptivity: a.shell } },
        ];
        let interior = config
            .baffles
            .iter()
            .map(|&segment| Surface {
                segment,
                kind: SurfaceKind::Absorber { absorptivity: a.baffles },
            })
            .collect();
        Self::new(config, boundary, interior, sources, false)
    }

    pub fn new(
        config: OpticalConfig,
        boundary: Vec<Surface>,
        interior: Vec<Surface>,
        sources: Sources,
        fresnel: bool,
    ) -> Result<Self, TraceError> {
        const JOIN_TOL: f64 = 1e-9;
        if boundary.len() < 3 {
            return Err(TraceError::InvalidScene("boundary needs at least three surfaces".into()));
        }
        for (i, s) in boundary.iter().enumerate() {
            let next = &boundary[(i + 1) % boundary.len()];
            if (s.segment.b - next.segment.a).norm() > JOIN_TOL {
                return Err(TraceError::InvalidScene(format!(
                    "boundary is not closed between surfaces {i} and {}",
                    (i + 1) % boundary.len()
                )));
            }
        }
        for s in boundary.iter().chain(&interior) {
            if s.segment.length() <= 0.0 {
                return Err(TraceError::InvalidScene("degenerate surface".into()));
            }
            if let SurfaceKind::Absorber { absorptivity } = s.kind {
                if !(0.0..=1.0).contains(&absorptivity) {
                    return Err(TraceError::InvalidScene("absorptivity outside [0, 1]".into()));
                }
            }
        }
        let find = |k: SurfaceKind| {
            let idx: Vec<usize> = boundary
                .iter()
                .enumerate()
                .filter(|(_, s)| s.kind == k)
                .map(|(i, _)| i)
                .collect();
            match idx.as_slice() {
                [i] => Ok(*i),
                _ => Err(TraceError::InvalidScene(format!(
                    "expected exactly one {k:?} surface, found {}",
                    idx.len()
                ))),
            }
        };
        let touching = find(SurfaceKind::Touching)?;
        let viewing = find(SurfaceKind::Viewing)?;
        if interior.iter().any(|s| !matches!(s.kind, SurfaceKind::Absorber { .. })) {
            return Err(TraceError::InvalidScene("interior surfaces must be absorbers".into()));
        }
        if !(sources.led_intensity >= 0.0 && sources.ambient_intensity >= 0.0) {
            return Err(TraceError::InvalidScene("source intensities must be non-negative".into()));
        }
        let mut scene = Scene2D {
            camera: CameraModel::placeholder(),
            config,
            boundary,
            interior,
            sources,
            fresnel,
            touching,
            viewing,
        };
        scene.camera = CameraModel::build(&scene)?;
        Ok(scene)
    }

    /// Same geometry, different source strengths (camera tables reused).
    pub fn with_sources(&self, sources: Sources) -> Self {
        Self { sources, ..self.clone() }
    }

    /// Rebuild with Fresnel reflection switched on or off.
    pub fn with_fresnel(&self, fresnel: bool) -> Result<Self, TraceError> {
        Self::new(
            self.config.clone(),
            self.boundary.clone(),
            self.interior.clone(),
            self.sources,
            fresnel,
        )
    }

    pub fn touching(&self) -> &Surface {
        &self.boundary[self.touching]
    }

    pub fn viewing(&self) -> &Surface {
        &self.boundary[self.viewing]
    }

    pub fn touching_length(&self) -> f64 {
        self.touching().segment.length()
    }

    pub(crate) fn touching_index(&self) -> usize {
        self.touching
    }


    pub(crate) fn surface(&self, i: usize) -> &Surface {
        if i < self.boundary.len() {
            &self.boundary[i]
        } else {
            &self.interior[i - self.boundary.len()]
        }
    }

    pub(crate) fn surface_count(&self) -> usize {
        self.boundary.len() + self.interior.len()
    }

    /// Nearest surface crossed by a ray, skipping `exclude`.
    pub(crate) fn nearest_hit(&self, origin: Vec2, dir: Vec2, exclude: Option<usize>) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..self.surface_count() {
            if Some(i) == exclude {
                continue;
            }
            if let Some((t, s)) = self.surface(i).segment.intersect(origin, dir) {
                if t > 1e-12 && best.is_none_or(|b| t < b.1) {
                    best = Some((i, t, s));
                }
            }
        }
        best
    }

    /// Whether the open segment `p -> q` crosses anything other than the
    /// touching and viewing surfaces.
    pub(crate) fn occluded(&self, p: Vec2, q: Vec2) -> bool {
        let d = q - p;
        let len = d.norm();
        let dir = d * (1.0 / len);
        (0..self.surface_count())
            .filter(|&i| i != self.touching && i != self.viewing)
            .any(|i| {
                self.surface(i)
                    .segment
                    .intersect(p, dir)
                    .is_some_and(|(t, _)| t < len - 1e-12)
            })
    }
}

/// On-disk scene: optics plus sources.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub optics: OpticalConfig,
    #[serde(default)]
    pub sources: Sources,
    #[serde(default)]
    pub fresnel: bool,
}

impl SceneFile {
    pub fn build(&self) -> Result<Scene2D, TraceError> {
        let scene = Scene2D::from_config(self.optics.clone(), self.sources)?;
        if self.fresnel {
            scene.with_fresnel(true)
        } else {
            Ok(scene)
        }
    }
}
