use serde::{Deserialize, Serialize};

use super::contact::ContactSpec;
use super::trace::trace;
use super::{Scene2D, Sources, TraceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Ambient source strength.
    ExternalIntensity,
    LedIntensity,
    /// Shell surface A angle, in radians.
    ThetaS,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            Self::ExternalIntensity => "external_intensity",
            Self::LedIntensity => "led_intensity",
            Self::ThetaS => "theta_s",
        }
    }
}

impl std::str::FromStr for SweepVariable {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "external_intensity" | "external" | "ambient" => Ok(Self::ExternalIntensity),
            "led_intensity" | "led" => Ok(Self::LedIntensity),
            "theta_s" => Ok(Self::ThetaS),
            other => Err(format!(
                "unknown sweep variable `{other}` (expected external_intensity, led_intensity or theta_s)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    /// Mean gray radiance over all columns of a no-contact trace.
    pub mean: f64,
    pub std: f64,
}

/// Scene with one parameter replaced.
pub fn sweep_scene(template: &Scene2D, variable: SweepVariable, value: f64) -> Result<Scene2D, TraceError> {
    match variable {
        SweepVariable::ExternalIntensity | SweepVariable::LedIntensity => {
            if !(value >= 0.0) {
                return Err(TraceError::InvalidSweepValue(value, variable.name()));
            }
            let mut s: Sources = template.sources;
            if variable == SweepVariable::ExternalIntensity {
                s.ambient_intensity = value;
            } else {
                s.led_intensity = value;
            }
            Ok(template.with_sources(s))
        }
        SweepVariable::ThetaS => {
            let mut cfg = template.config.clone();
            cfg.theta_s = value;
            Scene2D::from_config(cfg, template.sources)
                .and_then(|s| s.with_fresnel(template.fresnel))
                .map_err(|_| TraceError::InvalidSweepValue(value, variable.name()))
        }
    }
}

/// No-contact leakage for each value; every row uses the same seed.
pub fn leakage_sweep(
    template: &Scene2D,
    variable: SweepVariable,
    values: &[f64],
    seed: u64,
    rays: u64,
    pixels: usize,
) -> Result<Vec<SweepRow>, TraceError> {
    if values.len() < 2 {
        return Err(TraceError::TooFewValues);
    }
    values
        .iter()
        .map(|&value| {
            let scene = sweep_scene(template, variable, value)?;
            let prof = trace(&scene, &ContactSpec::none(), seed, rays, pixels)?;
            let gray: Vec<f64> = prof.samples().iter().map(|c| (c[0] + c[1] + c[2]) / 3.0).collect();
            let n = gray.len() as f64;
            let mean = gray.iter().sum::<f64>() / n;
            let std = (gray.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n).sqrt();
            Ok(SweepRow { value, mean, std })
        })
        .collect()
}

pub fn sweep_csv(variable: SweepVariable, rows: &[SweepRow]) -> String {
    let mut s = format!("{},mean,std\n", variable.name());
    for r in rows {
        s.push_str(&format!("{},{:e},{:e}\n", r.value, r.mean, r.std));
    }
    s
}
