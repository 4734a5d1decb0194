use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use wedgesense::imaging::ContactMask;
use wedgesense::optics::{Absorptivity, OpticalConfig};
use wedgesense::phototrace::{Scene2D, Sources};

use crate::{MaskFormat, SceneArgs};

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

/// Parse a JSON file, anchoring errors at `path:line:column`.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("{}: cannot read", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        let msg = e.to_string();
        let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
        anyhow!("{}:{}:{}: {}", path.display(), e.line(), e.column(), msg)
    })
}

pub fn load_config(path: Option<&Path>) -> Result<OpticalConfig> {
    match path {
        Some(p) => load_json(p),
        None => Ok(OpticalConfig::default()),
    }
}

pub fn build_scene(args: &SceneArgs) -> Result<Scene2D> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(a) = args.absorptivity {
        if !(0.0..=1.0).contains(&a) {
            bail!("--absorptivity must lie in [0, 1]");
        }
        cfg.absorptivity = Absorptivity::uniform(a);
    }
    let sources = Sources {
        led_intensity: args.led_intensity,
        ambient_intensity: args.ambient_intensity,
    };
    if !(sources.led_intensity >= 0.0 && sources.ambient_intensity >= 0.0) {
        bail!("source intensities must be non-negative");
    }
    let scene = Scene2D::from_config(cfg, sources)?;
    Ok(if args.fresnel { scene.with_fresnel(true)? } else { scene })
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("{}: cannot create directory", dir.display()))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("{}: cannot write", path.display()))
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    args: &'a [String],
    config_paths: Vec<String>,
    seed: u64,
    output_dir: String,
    timestamp_unix: u64,
}

pub fn write_manifest(dir: &Path, subcommand: &str, argv: &[String], configs: &[&Path], seed: u64) -> Result<()> {
    let m = RunManifest {
        tool: "wedgesense",
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        args: argv.get(1..).unwrap_or(&[]),
        config_paths: configs.iter().map(|p| p.display().to_string()).collect(),
        seed,
        output_dir: dir.display().to_string(),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    write(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&m)? + "\n")
}

/// Write `stem.png` and/or `stem_rle.csv`.
pub fn write_mask(dir: &Path, stem: &str, mask: &ContactMask, format: MaskFormat) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if matches!(format, MaskFormat::Png | MaskFormat::Both) {
        let p = dir.join(format!("{stem}.png"));
        mask.write_png(&p).with_context(|| format!("{}: cannot write", p.display()))?;
        out.push(p);
    }
    if matches!(format, MaskFormat::Rle | MaskFormat::Both) {
        let p = dir.join(format!("{stem}_rle.csv"));
        write(&p, mask.to_rle_csv())?;
        out.push(p);
    }
    Ok(out)
}

/// Comma-separated list of numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| anyhow!("`{v}` is not a number")))
        .collect()
}

/// `start:stop:step`, inclusive of `stop` within rounding.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts = parse_list(&s.replace(':', ","))?;
    let [a, b, step] = parts[..] else {
        bail!("range must be start:stop:step");
    };
    if step == 0.0 || !step.is_finite() || (b - a) * step < 0.0 {
        bail!("range step must be non-zero and point from start to stop");
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| a + k as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_range("45:30:-5").unwrap(), vec![45.0, 40.0, 35.0, 30.0]);
        assert_eq!(parse_range("0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_range("0:1:-1").is_err());
        assert!(parse_range("0:1").is_err());
        assert_eq!(parse_list("1, 2.5").unwrap(), vec![1.0, 2.5]);
        assert!(parse_list("a").is_err());
    }

    #[test]
    fn json_errors_are_line_anchored() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, "{\n  \"n_medium\": oops\n}").unwrap();
        let e = load_json::<OpticalConfig>(&p).unwrap_err().to_string();
        assert!(e.contains("c.json:2:"), "{e}");
    }
}
