use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use wedgesense::optics::{full_report, ConditionReport, OpticalConfig};
use wedgesense::phototrace::{calibrate_exposure, sweep_scene, trace, ContactSpec, Scene2D, SweepVariable};

use crate::io::{self, Status};
use crate::plot::{self, BLUE, ORANGE};
use crate::SceneArgs;

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Optical configuration (JSON, degrees and mm); default geometry if omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
    /// Also write report.json and a run manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ReportDeg {
    critical_angle_deg: f64,
    external_rejection: CheckDeg,
    internal_rejection: CheckDeg,
    contact_transmission: CheckDeg,
    max_theta_it_deg: Option<f64>,
    direct_view: bool,
    all_pass: bool,
}

#[derive(Debug, Serialize)]
struct CheckDeg {
    satisfied: bool,
    margin_deg: f64,
}

fn r9(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

fn to_deg(r: &ConditionReport) -> ReportDeg {
    let c = |s: bool, m: f64| CheckDeg {
        satisfied: s,
        margin_deg: r9(m.to_degrees()),
    };
    ReportDeg {
        critical_angle_deg: r9(r.critical_angle.to_degrees()),
        external_rejection: c(r.external_rejection.satisfied, r.external_rejection.margin),
        internal_rejection: c(r.internal_rejection.check.satisfied, r.internal_rejection.check.margin),
        contact_transmission: c(r.contact_transmission.check.satisfied, r.contact_transmission.check.margin),
        max_theta_it_deg: r.internal_rejection.max_theta_it.map(|a| r9(a.to_degrees())),
        direct_view: r.internal_rejection.direct_view,
        all_pass: r.all_pass(),
    }
}

pub fn check(args: &CheckArgs, seed: u64, argv: &[String]) -> Result<Status> {
    let cfg = io::load_config(args.config.as_deref())?;
    let report = to_deg(&full_report(&cfg));
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
        println!("critical angle        {:9.4} deg", report.critical_angle_deg);
        for (name, c) in [
            ("external_rejection", &report.external_rejection),
            ("internal_rejection", &report.internal_rejection),
            ("contact_transmission", &report.contact_transmission),
        ] {
            println!("{name:<21} {:>4}  margin {:+9.4} deg", verdict(c.satisfied), c.margin_deg);
        }
        if let Some(t) = report.max_theta_it_deg {
            println!("max LED incidence     {t:9.4} deg");
        }
        if report.direct_view {
            println!("LED cone reaches the viewing surface directly");
        }
        println!("{}", if report.all_pass { "all conditions pass" } else { "design check failed" });
    }
    if let Some(dir) = &args.out {
        io::ensure_dir(dir)?;
        io::write(&dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
        let configs: Vec<&std::path::Path> = args.config.iter().map(|p| p.as_path()).collect();
        io::write_manifest(dir, "design check", argv, &configs, seed)?;
    }
    Ok(if report.all_pass { Status::Pass } else { Status::Fail })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Variable {
    /// Touching-to-viewing angle, degrees.
    ThetaTv,
    /// Shell angle, degrees.
    ThetaS,
    /// LED cone half-angle, degrees.
    LedHalfAngle,
    ExternalIntensity,
    LedIntensity,
}

impl Variable {
    fn name(self) -> &'static str {
        match self {
            Self::ThetaTv => "theta_tv_deg",
            Self::ThetaS => "theta_s_deg",
            Self::LedHalfAngle => "led_half_angle_deg",
            Self::ExternalIntensity => "external_intensity",
            Self::LedIntensity => "led_intensity",
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long, value_enum)]
    pub variable: Variable,
    /// Comma-separated values (degrees for angles).
    #[arg(long, conflicts_with = "range", required_unless_present = "range")]
    pub values: Option<String>,
    /// start:stop:step, inclusive.
    #[arg(long)]
    pub range: Option<String>,
    /// Rays per value for the leakage columns; 0 skips tracing.
    #[arg(long, default_value_t = 100_000)]
    pub rays: u64,
    /// Camera pixels per trace.
    #[arg(long, default_value_t = 64)]
    pub pixels: usize,
    /// Rays used to calibrate the gray-level exposure.
    #[arg(long, default_value_t = 200_000)]
    pub exposure_rays: u64,
    #[arg(long)]
    pub out: PathBuf,
}

struct Row {
    value: f64,
    report: ConditionReport,
    leak: Option<(f64, f64)>,
}

fn config_at(base: &OpticalConfig, var: Variable, v: f64) -> OpticalConfig {
    let mut c = base.clone();
    match var {
        Variable::ThetaTv => c.theta_tv = v.to_radians(),
        Variable::ThetaS => c.theta_s = v.to_radians(),
        Variable::LedHalfAngle => c.led.half_angle = v.to_radians(),
        Variable::ExternalIntensity | Variable::LedIntensity => {}
    }
    c
}

fn scene_at(template: &Scene2D, var: Variable, v: f64) -> Option<Scene2D> {
    match var {
        Variable::ExternalIntensity => sweep_scene(template, SweepVariable::ExternalIntensity, v).ok(),
        Variable::LedIntensity => sweep_scene(template, SweepVariable::LedIntensity, v).ok(),
        Variable::ThetaS => sweep_scene(template, SweepVariable::ThetaS, v.to_radians()).ok(),
        Variable::ThetaTv | Variable::LedHalfAngle => Scene2D::from_config(config_at(&template.config, var, v), template.sources)
            .and_then(|s| s.with_fresnel(template.fresnel))
            .ok(),
    }
}

pub fn sweep(args: &SweepArgs, seed: u64, argv: &[String]) -> Result<Status> {
    let values = match (&args.values, &args.range) {
        (Some(v), _) => io::parse_list(v)?,
        (None, Some(r)) => io::parse_range(r)?,
        (None, None) => bail!("give --values or --range"),
    };
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    if args.pixels == 0 {
        bail!("--pixels must be at least 1");
    }
    let template = io::build_scene(&args.scene)?;
    let exposure = if args.rays > 0 {
        Some(calibrate_exposure(&template, seed, args.exposure_rays.max(1), args.pixels)?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(values.len());
    for &v in &values {
        let cfg = config_at(&template.config, args.variable, v);
        let report = full_report(&cfg);
        let leak = match exposure {
            Some(exp) => match scene_at(&template, args.variable, v) {
                Some(scene) => {
                    let prof = trace(&scene, &ContactSpec::none(), seed, args.rays, args.pixels)?;
                    let gray: Vec<f64> = prof.samples().iter().map(|c| (c[0] + c[1] + c[2]) / 3.0 * exp).collect();
                    let n = gray.len() as f64;
                    let mean = gray.iter().sum::<f64>() / n;
                    let std = (gray.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n).sqrt();
                    Some((mean, std))
                }
                None => None,
            },
            None => None,
        };
        rows.push(Row { value: v, report, leak });
    }

    io::ensure_dir(&args.out)?;
    let mut csv = format!(
        "{},external_margin_deg,internal_margin_deg,contact_margin_deg,all_pass,leakage_mean_gray,leakage_std_gray\n",
        args.variable.name()
    );
    for r in &rows {
        let (m, s) = match r.leak {
            Some((m, s)) => (format!("{m:.6}"), format!("{s:.6}")),
            None => (String::new(), String::new()),
        };
        csv.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{},{m},{s}\n",
            r.value,
            r.report.external_rejection.margin.to_degrees(),
            r.report.internal_rejection.check.margin.to_degrees(),
            r.report.contact_transmission.check.margin.to_degrees(),
            r.report.all_pass()
        ));
    }
    io::write(&args.out.join("sweep.csv"), &csv)?;
    if rows.len() >= 2 {
        let leak: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.leak.map(|(m, _)| (r.value, m))).collect();
        let img = if leak.len() >= 2 {
            plot::line_chart(&[(&leak, BLUE)])
        } else {
            let ext: Vec<(f64, f64)> = rows.iter().map(|r| (r.value, r.report.external_rejection.margin.to_degrees())).collect();
            let con: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| (r.value, r.report.contact_transmission.check.margin.to_degrees()))
                .collect();
            plot::line_chart(&[(&ext, BLUE), (&con, ORANGE)])
        };
        img.write_png(args.out.join("sweep.png"))?;
    }
    let configs: Vec<&std::path::Path> = args.scene.config.iter().map(|p| p.as_path()).collect();
    io::write_manifest(&args.out, "design sweep", argv, &configs, seed)?;
    print!("{csv}");
    Ok(Status::Pass)
}
