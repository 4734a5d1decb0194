use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use wedgesense::calibration::{
    build_rectify_map, detect_grid, lattice_residual, GridSpec, SyntheticGrid, SyntheticWarp, DEFAULT_THRESHOLD,
};
use wedgesense::imaging::{crop_around, remap, remap_mask, ContactMask, RectifyMap, SensorImage};
use wedgesense::phototrace::{calibrate_exposure, render as render_frame, ContactLayout, ContactSpec, NoiseModel, RenderSettings};
use wedgesense::segmentation::{
    build_reference, denoise, segment as segment_frame, stats, ContactStats, ReferenceState, Thresholds, DEFAULT_MIN_COMPONENT,
    DEFAULT_REFERENCE_FRAMES,
};

use crate::io::{self, Status};
use crate::{MaskFormat, SceneArgs};

pub const RECTIFY_MAP_FILE: &str = "rectify_map.json";

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Contact cross-section applied to every row (JSON list of intervals in mm).
    #[arg(long, conflicts_with = "mask")]
    pub contact: Option<PathBuf>,
    /// Per-pixel contact mask (PNG); sets the frame size.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Gray albedo for contact taken from --mask.
    #[arg(long, default_value_t = 0.9)]
    pub albedo: f64,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 48)]
    pub height: usize,
    /// Rays per distinct row cross-section.
    #[arg(long, default_value_t = 50_000)]
    pub rays: u64,
    /// Gaussian sensor noise, gray levels.
    #[arg(long, default_value_t = 0.8)]
    pub noise: f64,
    /// Gray levels per unit radiance; calibrated so a full white contact peaks at 200 if omitted.
    #[arg(long)]
    pub exposure: Option<f64>,
    #[arg(long, default_value_t = 400_000)]
    pub exposure_rays: u64,
    /// Also render this many no-contact frames first, as a numbered sequence.
    #[arg(long, default_value_t = 0)]
    pub reference_frames: usize,
    /// Number of contact frames, each with its own noise and ray streams.
    #[arg(long, default_value_t = 1)]
    pub frames: usize,
    #[arg(long, value_enum, default_value_t = MaskFormat::Png)]
    pub mask_format: MaskFormat,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn render(args: &RenderArgs, seed: u64, argv: &[String]) -> Result<Status> {
    let scene = io::build_scene(&args.scene)?;
    let length = scene.touching_length();
    if !(0.0..=1.0).contains(&args.albedo) {
        bail!("--albedo must lie in [0, 1]");
    }
    if !(args.noise >= 0.0) {
        bail!("--noise must be non-negative");
    }
    let (layout, width, height) = match (&args.contact, &args.mask) {
        (Some(p), _) => {
            let spec: ContactSpec = io::load_json(p)?;
            spec.validate(length)?;
            (ContactLayout::Uniform(spec), args.width, args.height)
        }
        (None, Some(p)) => {
            let m = ContactMask::read_png(p).with_context(|| format!("{}: cannot read mask", p.display()))?;
            let (w, h) = m.dims();
            (ContactLayout::from_mask(&m, length, [args.albedo; 3]), w, h)
        }
        (None, None) => (ContactLayout::Uniform(ContactSpec::none()), args.width, args.height),
    };
    if width == 0 || height == 0 {
        bail!("frame dimensions must be non-zero");
    }
    let exposure = match args.exposure {
        Some(e) if e > 0.0 => e,
        Some(_) => bail!("--exposure must be positive"),
        None => calibrate_exposure(&scene, seed, args.exposure_rays.max(1), width)?,
    };
    let settings = RenderSettings {
        seed,
        rays: args.rays,
        width,
        height,
        exposure_scale: exposure,
        noise: NoiseModel { sigma: args.noise },
    };
    io::ensure_dir(&args.out)?;
    let n = args.reference_frames;
    if args.frames == 0 {
        bail!("--frames must be at least 1");
    }
    if n > 0 || args.frames > 1 {
        let dir = args.out.join("frames");
        io::ensure_dir(&dir)?;
        let none = ContactLayout::Uniform(ContactSpec::none());
        for i in 0..n + args.frames {
            let s = RenderSettings {
                seed: seed.wrapping_add(i as u64),
                ..settings
            };
            let l = if i < n { &none } else { &layout };
            render_frame(&scene, l, &s)?.write_png(dir.join(format!("frame_{i:04}.png")))?;
        }
    } else {
        render_frame(&scene, &layout, &settings)?.write_png(args.out.join("frame.png"))?;
    }
    let truth = layout.ground_truth(width, height, length)?;
    io::write_mask(&args.out, "truth", &truth, args.mask_format)?;
    let mut configs: Vec<&Path> = Vec::new();
    configs.extend(args.scene.config.as_deref());
    configs.extend(args.contact.as_deref());
    configs.extend(args.mask.as_deref());
    io::write_manifest(&args.out, "render", argv, &configs, seed)?;
    println!("exposure_scale {exposure:.6}");
    println!("truth coverage {:.6}", truth.count() as f64 / (width * height) as f64);
    Ok(Status::Pass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Warp {
    Identity,
    /// 10 degree rotation.
    Rotate,
    /// 1.2x horizontal stretch.
    Scale,
    /// Smooth polynomial distortion.
    Poly,
}

impl Warp {
    fn synthetic(self) -> SyntheticWarp {
        match self {
            Self::Identity => SyntheticWarp::Identity,
            Self::Rotate => SyntheticWarp::Rotation(10.0),
            Self::Scale => SyntheticWarp::AnisotropicScale(1.2, 1.0),
            Self::Poly => SyntheticWarp::Polynomial(2e-6),
        }
    }
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Raw image of the imprint grid.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub image: Option<PathBuf>,
    /// Generate a synthetic grid with this distortion instead.
    #[arg(long, value_enum)]
    pub synthetic: Option<Warp>,
    #[arg(long, default_value_t = 5)]
    pub rows: usize,
    #[arg(long, default_value_t = 5)]
    pub cols: usize,
    #[arg(long, default_value_t = 3.0)]
    pub pitch: f64,
    /// Gray threshold separating imprints from background.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: u8,
    /// Output resolution, pixels per mm.
    #[arg(long, default_value_t = 10.0)]
    pub resolution: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn calibrate(args: &CalibrateArgs, seed: u64, argv: &[String]) -> Result<Status> {
    let spec = GridSpec {
        rows: args.rows,
        cols: args.cols,
        pitch_mm: args.pitch,
    };
    spec.validate()?;
    io::ensure_dir(&args.out)?;
    let img = match (&args.image, args.synthetic) {
        (Some(p), _) => SensorImage::read_png(p).with_context(|| format!("{}: cannot read image", p.display()))?,
        (None, Some(w)) => {
            let size = |n: usize| ((n + 1) as f64 * args.pitch * 10.0 * 1.3).ceil() as usize;
            let g = SyntheticGrid::centered(spec, 10.0, size(args.cols), size(args.rows));
            let c = (g.width as f64 / 2.0, g.height as f64 / 2.0);
            let warp = w.synthetic();
            let img = g.render(|x, y| warp.to_ideal(x, y, c))?;
            img.write_png(args.out.join("grid.png"))?;
            img
        }
        (None, None) => bail!("give --image or --synthetic"),
    };
    let det = match detect_grid(&img, &spec, args.threshold) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("calibration failed: {e}");
            return Ok(Status::Fail);
        }
    };
    let map = build_rectify_map(&det, &spec, args.resolution, img.dims())?;
    io::write(&args.out.join(RECTIFY_MAP_FILE), map.to_sidecar())?;
    let mut csv = String::from("row,col,x_px,y_px\n");
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let (x, y) = det.center(r, c);
            csv.push_str(&format!("{r},{c},{x:.4},{y:.4}\n"));
        }
    }
    io::write(&args.out.join("centers.csv"), csv)?;
    let rect = remap(&img, &map)?;
    rect.write_png(args.out.join("rectified.png"))?;
    let configs: Vec<&Path> = args.image.iter().map(|p| p.as_path()).collect();
    io::write_manifest(&args.out, "calibrate", argv, &configs, seed)?;
    println!("pixel pitch {:.4} px/mm ({:.4} px per imprint step)", det.mean_pixel_pitch, det.px_per_pitch());
    match lattice_residual(&rect, &spec, args.resolution, args.threshold) {
        Ok(r) => println!("rectified residual {r:.4} px"),
        Err(e) => println!("rectified residual unavailable: {e}"),
    }
    Ok(Status::Pass)
}

fn parse_thresholds(s: &str) -> Result<Thresholds> {
    let v: Vec<u16> = s
        .split(',')
        .map(|t| t.trim().parse::<u16>().map_err(|_| anyhow!("threshold `{t}` is not a non-negative integer")))
        .collect::<Result<_>>()?;
    let [t0, t1, t2, t3] = v[..] else {
        bail!("--thresholds takes four values t0,t1,t2,t3");
    };
    Ok(Thresholds { t0, t1, t2, t3 })
}

/// Segmentation options shared by `segment` and `pipeline`.
#[derive(Debug, Args)]
pub struct SegmentOptions {
    /// Number of leading no-contact frames averaged into the reference.
    #[arg(long, default_value_t = DEFAULT_REFERENCE_FRAMES)]
    pub ref_count: usize,
    /// t0,t1,t2,t3 gray thresholds.
    #[arg(long, default_value = "25,20,30,40")]
    pub thresholds: String,
    /// Drop 8-connected blobs smaller than this many pixels.
    #[arg(long, default_value_t = DEFAULT_MIN_COMPONENT)]
    pub min_component: usize,
    /// Rectification map sidecar applied to each mask.
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MaskFormat::Png)]
    pub mask_format: MaskFormat,
}

impl SegmentOptions {
    fn load_map(&self) -> Result<Option<RectifyMap>> {
        self.map
            .as_ref()
            .map(|p| {
                let text = fs::read_to_string(p).with_context(|| format!("{}: cannot read", p.display()))?;
                RectifyMap::from_sidecar(&text).with_context(|| format!("{}: invalid rectify map", p.display()))
            })
            .transpose()
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Reference frames, in order.
    #[arg(long, num_args = 1.., required_unless_present = "reference_dir")]
    pub reference: Vec<PathBuf>,
    /// Directory whose PNG frames, sorted by name, are the reference.
    #[arg(long, conflicts_with = "reference")]
    pub reference_dir: Option<PathBuf>,
    #[arg(long)]
    pub frame: PathBuf,
    #[command(flatten)]
    pub opts: SegmentOptions,
    /// Also write the contact crop with this padding.
    #[arg(long)]
    pub crop_padding: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("{}: cannot list frames", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    v.sort();
    Ok(v)
}

fn read_frames(paths: &[PathBuf]) -> Result<Vec<SensorImage>> {
    paths
        .iter()
        .map(|p| SensorImage::read_png(p).with_context(|| format!("{}: cannot read frame", p.display())))
        .collect()
}

fn stats_header() -> &'static str {
    "frame,pixel_count,coverage,centroid_x,centroid_y,components\n"
}

fn stats_line(name: &str, s: &ContactStats) -> String {
    let (cx, cy) = match s.centroid {
        Some((x, y)) => (format!("{x:.4}"), format!("{y:.4}")),
        None => (String::new(), String::new()),
    };
    format!("{name},{},{:.6},{cx},{cy},{}\n", s.pixel_count, s.coverage, s.components.len())
}

fn segment_one(frame: &SensorImage, reference: &ReferenceState, th: &Thresholds, opts: &SegmentOptions, map: Option<&RectifyMap>) -> Result<ContactMask> {
    let mask = denoise(&segment_frame(frame, reference, th)?, opts.min_component);
    Ok(match map {
        Some(m) => {
            if (m.source_width, m.source_height) != mask.dims() {
                bail!(
                    "rectify map expects {}x{} frames, got {}x{}",
                    m.source_width,
                    m.source_height,
                    mask.width(),
                    mask.height()
                );
            }
            remap_mask(&mask, m)?
        }
        None => mask,
    })
}

pub fn segment(args: &SegmentArgs, seed: u64, argv: &[String]) -> Result<Status> {
    let th = parse_thresholds(&args.opts.thresholds)?;
    let ref_paths = match &args.reference_dir {
        Some(d) => list_pngs(d)?,
        None => args.reference.clone(),
    };
    let refs = read_frames(&ref_paths)?;
    let reference = build_reference(&refs, args.opts.ref_count)?;
    let map = args.opts.load_map()?;
    let frame = SensorImage::read_png(&args.frame).with_context(|| format!("{}: cannot read frame", args.frame.display()))?;
    let mask = segment_one(&frame, &reference, &th, &args.opts, map.as_ref())?;
    io::ensure_dir(&args.out)?;
    io::write_mask(&args.out, "mask", &mask, args.opts.mask_format)?;
    let st = stats(&mask);
    io::write(&args.out.join("stats.csv"), format!("{}{}", stats_header(), stats_line("frame", &st)))?;
    if let Some(pad) = args.crop_padding {
        if !mask.is_empty() && map.is_none() {
            crop_around(&frame, &mask, pad)?.write_png(args.out.join("crop.png"))?;
        }
    }
    if let Some(m) = &map {
        io::write(&args.out.join(RECTIFY_MAP_FILE), m.to_sidecar())?;
    }
    let mut configs: Vec<&Path> = vec![args.frame.as_path()];
    configs.extend(args.opts.map.as_deref());
    io::write_manifest(&args.out, "segment", argv, &configs, seed)?;
    println!("pixel_count {} coverage {:.6}", st.pixel_count, st.coverage);
    Ok(Status::Pass)
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Directory of PNG frames, processed in name order.
    #[arg(long)]
    pub frames: PathBuf,
    #[command(flatten)]
    pub opts: SegmentOptions,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn pipeline(args: &PipelineArgs, seed: u64, argv: &[String]) -> Result<Status> {
    let th = parse_thresholds(&args.opts.thresholds)?;
    let paths = list_pngs(&args.frames)?;
    let n = args.opts.ref_count;
    if paths.len() < n {
        bail!("{}: need {n} reference frames, found {} frames", args.frames.display(), paths.len());
    }
    let refs = read_frames(&paths[..n])?;
    let reference = build_reference(&refs, n)?;
    let map = args.opts.load_map()?;
    io::ensure_dir(&args.out)?;
    let mask_dir = args.out.join("masks");
    io::ensure_dir(&mask_dir)?;
    let mut csv = stats_header().to_string();
    for p in &paths[n..] {
        let frame = SensorImage::read_png(p).with_context(|| format!("{}: cannot read frame", p.display()))?;
        let mask = segment_one(&frame, &reference, &th, &args.opts, map.as_ref())?;
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
        io::write_mask(&mask_dir, stem, &mask, args.opts.mask_format)?;
        csv.push_str(&stats_line(stem, &stats(&mask)));
    }
    io::write(&args.out.join("stats.csv"), &csv)?;
    if let Some(m) = &map {
        io::write(&args.out.join(RECTIFY_MAP_FILE), m.to_sidecar())?;
    }
    let mut configs: Vec<&Path> = vec![args.frames.as_path()];
    configs.extend(args.opts.map.as_deref());
    io::write_manifest(&args.out, "pipeline", argv, &configs, seed)?;
    println!("{} operation frames processed", paths.len() - n);
    Ok(Status::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_parsing() {
        assert_eq!(parse_thresholds("25,20,30,40").unwrap(), Thresholds::default());
        assert!(parse_thresholds("1,2,3").is_err());
        assert!(parse_thresholds("1,2,3,-4").is_err());
    }
}
