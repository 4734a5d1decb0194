#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod design;
mod image;
mod io;
mod plot;
mod simulate;

/// Optics checks, light-transport sweeps, synthetic rendering and contact
/// perception for a wedge-geometry visual-tactile sensor.
///
/// Exit codes: 0 success or all checks pass, 1 checks failed, 2 usage or
/// configuration error.
#[derive(Debug, Parser)]
#[command(name = "wedgesense", version)]
pub struct Cli {
    /// Seed for every random stream; recorded in the run manifest.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design-condition checks and parameter sweeps.
    #[command(subcommand)]
    Design(DesignCommand),
    /// Render synthetic raw frames from a contact description.
    Render(image::RenderArgs),
    /// Detect an imprint grid and write a rectification map.
    Calibrate(image::CalibrateArgs),
    /// Segment one frame against a no-contact reference.
    Segment(image::SegmentArgs),
    /// Reference, segment, rectify and measure a directory of frames.
    Pipeline(image::PipelineArgs),
    /// Run a simulated contact-driven control task.
    #[command(subcommand)]
    Simulate(SimulateCommand),
}

#[derive(Debug, Subcommand)]
pub enum DesignCommand {
    /// Evaluate the three design conditions.
    Check(design::CheckArgs),
    /// Sweep one parameter and report margins and leakage.
    Sweep(design::SweepArgs),
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Sweep over a liquid while holding contact coverage near the target.
    Spread(simulate::SimArgs),
    /// Approach fast, slow on contact, stop past the coverage threshold.
    Dip(simulate::SimArgs),
    /// Follow a drifting film with two sensors.
    Film(simulate::SimArgs),
    /// Close the gripper until one sensor sees enough contact pixels.
    Grasp(simulate::SimArgs),
}

/// Shared source and absorber overrides for traced scenes.
#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    /// Optical configuration (JSON, degrees and mm); default geometry if omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// LED intensity (linear lux proxy).
    #[arg(long, default_value_t = 430.0)]
    pub led_intensity: f64,
    /// Ambient intensity (linear lux proxy).
    #[arg(long, default_value_t = 1000.0)]
    pub ambient_intensity: f64,
    /// Override every absorber's absorptivity.
    #[arg(long)]
    pub absorptivity: Option<f64>,
    /// Use Fresnel partial reflection at the interfaces.
    #[arg(long)]
    pub fresnel: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum MaskFormat {
    Png,
    Rle,
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let result = match &cli.command {
        Command::Design(DesignCommand::Check(a)) => design::check(a, cli.seed, &argv),
        Command::Design(DesignCommand::Sweep(a)) => design::sweep(a, cli.seed, &argv),
        Command::Render(a) => image::render(a, cli.seed, &argv),
        Command::Calibrate(a) => image::calibrate(a, cli.seed, &argv),
        Command::Segment(a) => image::segment(a, cli.seed, &argv),
        Command::Pipeline(a) => image::pipeline(a, cli.seed, &argv),
        Command::Simulate(s) => {
            let (task, a) = match s {
                SimulateCommand::Spread(a) => (simulate::Task::Spread, a),
                SimulateCommand::Dip(a) => (simulate::Task::Dip, a),
                SimulateCommand::Film(a) => (simulate::Task::Film, a),
                SimulateCommand::Grasp(a) => (simulate::Task::Grasp, a),
            };
            simulate::run(task, a, cli.seed, &argv)
        }
    };
    match result {
        Ok(io::Status::Pass) => ExitCode::SUCCESS,
        Ok(io::Status::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
