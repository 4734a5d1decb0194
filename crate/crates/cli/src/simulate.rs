use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use serde::Deserialize;
use wedgesense::control::{
    log_csv, run_dip, run_film, run_grasp, run_spread, ContactWorld, ControlError, DipParams, EndEffectorState, FilmParams,
    FilmTrack, GraspObject, GraspParams, GroundTruth, LogRow, MediumType, Observation, PdGains, RenderedSensing, Sensing,
    SpreadParams, Workspace,
};
use wedgesense::optics::{Absorptivity, OpticalConfig};
use wedgesense::phototrace::{calibrate_exposure, ContactSpec, NoiseModel, RenderSettings, Scene2D, Sources};
use wedgesense::segmentation::{Thresholds, DEFAULT_REFERENCE_FRAMES};

use crate::io::{self, Status};
use crate::plot::{self, BLUE, ORANGE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Spread,
    Dip,
    Film,
    Grasp,
}

impl Task {
    fn name(self) -> &'static str {
        match self {
            Self::Spread => "spread",
            Self::Dip => "dip",
            Self::Film => "film",
            Self::Grasp => "grasp",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Simulation config (JSON, mm): world, gains, task parameters, start pose.
    #[arg(long)]
    pub world: Option<PathBuf>,
    /// Control steps for spread (default 700) and film (default 300).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Trajectory CSV path; defaults to <out>/log.csv.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Observe through render, segment and stats instead of ground truth.
    #[arg(long)]
    pub rendered: bool,
    /// Write each segmented mask as a PNG (rendered mode only).
    #[arg(long, requires = "rendered")]
    pub dump_masks: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RenderSim {
    width: usize,
    height: usize,
    rays: u64,
    noise_sigma: f64,
    exposure_rays: u64,
}

impl Default for RenderSim {
    fn default() -> Self {
        Self {
            width: 64,
            height: 16,
            rays: 20_000,
            noise_sigma: NoiseModel::default().sigma,
            exposure_rays: 200_000,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimConfig {
    world: Option<ContactWorld>,
    optics: Option<OpticalConfig>,
    gains: PdGains,
    spread: SpreadParams,
    dip: DipParams,
    film: FilmParams,
    film_track: FilmTrack,
    grasp: GraspParams,
    object: GraspObject,
    workspace: Workspace,
    start_x_mm: Option<f64>,
    start_z_mm: Option<f64>,
    start_aperture_mm: Option<f64>,
    render: RenderSim,
}

struct Dumping {
    inner: RenderedSensing,
    dir: PathBuf,
    frame: usize,
}

impl Sensing for Dumping {
    fn observe(&mut self, spec: &ContactSpec) -> Result<Observation, ControlError> {
        let obs = self.inner.observe(spec)?;
        if let Some(m) = self.inner.last_mask() {
            let _ = m.write_png(self.dir.join(format!("mask_{:05}.png", self.frame)));
        }
        self.frame += 1;
        Ok(obs)
    }
}

fn rendered_sensing(cfg: &SimConfig, seed: u64) -> Result<RenderedSensing> {
    let optics = cfg.optics.clone().unwrap_or(OpticalConfig {
        absorptivity: Absorptivity::REALISTIC,
        ..OpticalConfig::default()
    });
    let scene = Scene2D::from_config(optics, Sources::default())?;
    let r = cfg.render;
    let exposure = calibrate_exposure(&scene, seed, r.exposure_rays.max(1), r.width)?;
    let settings = RenderSettings {
        seed,
        rays: r.rays,
        width: r.width,
        height: r.height,
        exposure_scale: exposure,
        noise: NoiseModel { sigma: r.noise_sigma },
    };
    Ok(RenderedSensing::new(scene, settings, Thresholds::default(), DEFAULT_REFERENCE_FRAMES)?)
}

fn chart(task: Task, log: &[LogRow], film: &FilmTrack, rate: f64) -> wedgesense::imaging::SensorImage {
    let k = |r: &LogRow| r.step as f64;
    match task {
        Task::Spread | Task::Dip => {
            let cov: Vec<(f64, f64)> = log.iter().map(|r| (k(r), r.coverage)).collect();
            plot::line_chart(&[(&cov, BLUE)])
        }
        Task::Grasp => {
            let px: Vec<(f64, f64)> = log.iter().map(|r| (k(r), r.pixel_count as f64)).collect();
            plot::line_chart(&[(&px, BLUE)])
        }
        Task::Film => {
            let x: Vec<(f64, f64)> = log.iter().map(|r| (k(r), r.position[0])).collect();
            let f: Vec<(f64, f64)> = log.iter().map(|r| (k(r), film.film_center(r.step as f64 / rate))).collect();
            plot::line_chart(&[(&f, ORANGE), (&x, BLUE)])
        }
    }
}

pub fn run(task: Task, args: &SimArgs, seed: u64, argv: &[String]) -> Result<Status> {
    let cfg: SimConfig = match &args.world {
        Some(p) => io::load_json(p)?,
        None => SimConfig::default(),
    };
    let length = cfg
        .optics
        .as_ref()
        .map(|o| o.touching_length)
        .unwrap_or(OpticalConfig::default().touching_length);
    io::ensure_dir(&args.out)?;
    let mut truth = GroundTruth {
        touching_length: length,
        width: cfg.render.width,
        height: cfg.render.height,
    };
    let mut dumping;
    let mut rendered;
    let sensing: &mut dyn Sensing = if args.rendered {
        let inner = rendered_sensing(&cfg, seed)?;
        if args.dump_masks {
            let dir = args.out.join("masks");
            io::ensure_dir(&dir)?;
            dumping = Dumping { inner, dir, frame: 0 };
            &mut dumping
        } else {
            rendered = inner;
            &mut rendered
        }
    } else {
        &mut truth
    };

    let x0 = cfg.start_x_mm.unwrap_or(0.0);
    let result = match task {
        Task::Spread => {
            let mut world = cfg.world.clone().unwrap_or_else(ContactWorld::default_liquid);
            let start = EndEffectorState::at(x0, cfg.start_z_mm.unwrap_or(10.0));
            run_spread(&mut world, start, &cfg.gains, &cfg.spread, &cfg.workspace, sensing, length, args.steps.unwrap_or(700))
        }
        Task::Dip => {
            let world = cfg
                .world
                .clone()
                .unwrap_or_else(|| ContactWorld::flat(MediumType::Liquid, -50.0, 50.0, 0.0));
            let start = EndEffectorState::at(x0, cfg.start_z_mm.unwrap_or(50.0));
            run_dip(&world, start, &cfg.dip, sensing, length)
        }
        Task::Film => {
            let start = EndEffectorState::at(x0, 0.0);
            run_film(&cfg.film_track, start, &cfg.film, sensing, length, cfg.object.albedo, args.steps.unwrap_or(300))
        }
        Task::Grasp => run_grasp(&cfg.object, cfg.start_aperture_mm.unwrap_or(30.0), &cfg.grasp, sensing, length),
    };
    let log = match result {
        Ok(log) => log,
        Err(e @ (ControlError::TravelLimit { .. } | ControlError::GraspFailed | ControlError::WorkspaceBound { .. })) => {
            eprintln!("{} failed: {e}", task.name());
            write_common(args, argv, seed, &[])?;
            return Ok(Status::Fail);
        }
        Err(e) => return Err(e.into()),
    };
    write_common(args, argv, seed, &log)?;
    let rate = match task {
        Task::Film => cfg.film.control_rate,
        _ => cfg.gains.control_rate,
    };
    chart(task, &log, &cfg.film_track, rate).write_png(args.out.join("trajectory.png"))?;
    if let Some(last) = log.last() {
        println!(
            "{} steps, final coverage {:.4}, pixels {}, z {:.3} mm, aperture {:.3} mm, phase {}",
            log.len(),
            last.coverage,
            last.pixel_count,
            last.position[2],
            last.aperture,
            last.phase
        );
    }
    Ok(Status::Pass)
}

fn write_common(args: &SimArgs, argv: &[String], seed: u64, log: &[LogRow]) -> Result<()> {
    let log_path = args.log.clone().unwrap_or_else(|| args.out.join("log.csv"));
    io::write(&log_path, log_csv(log))?;
    let configs: Vec<&Path> = args.world.iter().map(|p| p.as_path()).collect();
    io::write_manifest(&args.out, "simulate", argv, &configs, seed)
}
