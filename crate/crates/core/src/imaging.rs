//! Raster containers and the primitives shared by calibration, segmentation
//! and synthesis.

use std::collections::VecDeque;
use std::io::{BufRead, Cursor, Seek, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ImagingError {
    #[error("image dimensions must be non-zero")]
    ZeroDimensions,
    #[error("buffer length {got} does not match {width}x{height}x{channels}")]
    BufferLength {
        got: usize,
        width: usize,
        height: usize,
        channels: usize,
    },
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("mask is empty: no contact")]
    EmptyMask,
    #[error("png: {0}")]
    PngDecode(#[from] png::DecodingError),
    #[error("png: {0}")]
    PngEncode(#[from] png::EncodingError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
}

/// Row-major 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Gray,
    R,
    G,
    B,
}

impl SensorImage {
    pub fn new(width: usize, height: usize) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::ZeroDimensions);
        }
        Ok(Self {
            width,
            height,
            pixels: vec![0; width * height * 3],
        })
    }

    pub fn from_raw(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::ZeroDimensions);
        }
        if pixels.len() != width * height * 3 {
            return Err(ImagingError::BufferLength {
                got: pixels.len(),
                width,
                height,
                channels: 3,
            });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self, ImagingError> {
        let mut img = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                img.set(x, y, f(x, y));
            }
        }
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, v: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&v);
    }

    pub fn gray(&self, x: usize, y: usize) -> f64 {
        let p = self.get(x, y);
        (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0
    }

    pub fn sub_image(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self, ImagingError> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(ImagingError::DimensionMismatch {
                expected: (self.width, self.height),
                got: (x0 + w, y0 + h),
            });
        }
        Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, ImagingError> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header()?;
            w.write_image_data(&self.pixels)?;
        }
        Ok(out)
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, ImagingError> {
        let (w, h, channels, data) = decode_8bit(Cursor::new(bytes))?;
        let mut pixels = Vec::with_capacity(w * h * 3);
        for px in data.chunks_exact(channels) {
            match channels {
                1 | 2 => pixels.extend_from_slice(&[px[0]; 3]),
                _ => pixels.extend_from_slice(&px[..3]),
            }
        }
        Self::from_raw(w, h, pixels)
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<(), ImagingError> {
        std::fs::File::create(path)?.write_all(&self.encode_png()?)?;
        Ok(())
    }

    pub fn read_png(path: impl AsRef<Path>) -> Result<Self, ImagingError> {
        Self::decode_png(&std::fs::read(path)?)
    }
}

fn decode_8bit<R: BufRead + Seek>(r: R) -> Result<(usize, usize, usize, Vec<u8>), ImagingError> {
    let mut dec = png::Decoder::new(r);
    dec.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = dec.read_info()?;
    let size = reader.output_buffer_size().ok_or(ImagingError::Format {
        what: "png",
        detail: "image too large".into(),
    })?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf)?;
    buf.truncate(info.buffer_size());
    let channels = info.color_type.samples();
    let (w, h) = (info.width as usize, info.height as usize);
    // drop per-row padding, if any
    let row = w * channels;
    if info.line_size != row {
        let packed = buf.chunks(info.line_size).flat_map(|r| r[..row].to_vec()).collect();
        return Ok((w, h, channels, packed));
    }
    Ok((w, h, channels, buf))
}

/// Channel statistics: mean and population standard deviation. `Gray` uses the
/// per-pixel mean of the three channels.
pub fn mean_std(img: &SensorImage, channel: Channel) -> (f64, f64) {
    let n = (img.width * img.height) as f64;
    let value = |p: &[u8]| match channel {
        Channel::Gray => (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0,
        Channel::R => p[0] as f64,
        Channel::G => p[1] as f64,
        Channel::B => p[2] as f64,
    };
    let mean = img.pixels.chunks_exact(3).map(value).sum::<f64>() / n;
    let var = img
        .pixels
        .chunks_exact(3)
        .map(|p| (value(p) - mean).powi(2))
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

/// Row-major boolean raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ContactMask {
    pub fn new(width: usize, height: usize) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::ZeroDimensions);
        }
        Ok(Self {
            width,
            height,
            bits: vec![false; width * height],
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self, ImagingError> {
        let mut m = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                m.bits[y * width + x] = f(x, y);
            }
        }
        Ok(m)
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::ZeroDimensions);
        }
        if bits.len() != width * height {
            return Err(ImagingError::BufferLength {
                got: bits.len(),
                width,
                height,
                channels: 1,
            });
        }
        Ok(Self { width, height, bits })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[bool] {
        &self.bits[y * self.width..(y + 1) * self.width]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Intersection over union; two empty masks score 1.
    pub fn iou(&self, other: &ContactMask) -> Result<f64, ImagingError> {
        if self.dims() != other.dims() {
            return Err(ImagingError::DimensionMismatch {
                expected: self.dims(),
                got: other.dims(),
            });
        }
        let (mut inter, mut union) = (0usize, 0usize);
        for (a, b) in self.bits.iter().zip(&other.bits) {
            inter += (*a && *b) as usize;
            union += (*a || *b) as usize;
        }
        Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
    }

    /// Whether every set pixel of `self` is set in `other`.
    pub fn is_subset_of(&self, other: &ContactMask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    /// 1-bit grayscale PNG, white = contact.
    pub fn encode_png(&self) -> Result<Vec<u8>, ImagingError> {
        let stride = self.width.div_ceil(8);
        let mut packed = vec![0u8; stride * self.height];
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    packed[y * stride + x / 8] |= 0x80 >> (x % 8);
                }
            }
        }
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::One);
            let mut w = enc.write_header()?;
            w.write_image_data(&packed)?;
        }
        Ok(out)
    }

    /// Any PNG; a pixel is set when its first channel exceeds 127.
    pub fn decode_png(bytes: &[u8]) -> Result<Self, ImagingError> {
        let (w, h, channels, data) = decode_8bit(Cursor::new(bytes))?;
        let bits = data.chunks_exact(channels).map(|p| p[0] > 127).collect();
        Self::from_bits(w, h, bits)
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<(), ImagingError> {
        std::fs::File::create(path)?.write_all(&self.encode_png()?)?;
        Ok(())
    }

    pub fn read_png(path: impl AsRef<Path>) -> Result<Self, ImagingError> {
        Self::decode_png(&std::fs::read(path)?)
    }

    /// Run-length CSV: a `width,height` header row, then `row,start,length`
    /// runs of set pixels.
    pub fn to_rle_csv(&self) -> String {
        let mut s = format!("width,height\n{},{}\nrow,start,length\n", self.width, self.height);
        for y in 0..self.height {
            let row = self.row(y);
            let mut x = 0;
            while x < self.width {
                if row[x] {
                    let start = x;
                    while x < self.width && row[x] {
                        x += 1;
                    }
                    s.push_str(&format!("{y},{start},{}\n", x - start));
                } else {
                    x += 1;
                }
            }
        }
        s
    }

    pub fn from_rle_csv(text: &str) -> Result<Self, ImagingError> {
        let bad = |detail: String| ImagingError::Format { what: "mask csv", detail };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let nums = |(i, l): (usize, &str)| -> Result<Vec<usize>, ImagingError> {
            l.split(',')
                .map(|f| f.trim().parse::<usize>().map_err(|e| bad(format!("line {}: {e}", i + 1))))
                .collect()
        };
        match lines.next() {
            Some((_, l)) if l.trim() == "width,height" => {}
            _ => return Err(bad("line 1: expected `width,height`".into())),
        }
        let dims = nums(lines.next().ok_or_else(|| bad("missing dimensions".into()))?)?;
        let [w, h] = dims[..] else {
            return Err(bad("line 2: expected two fields".into()));
        };
        match lines.next() {
            Some((_, l)) if l.trim() == "row,start,length" => {}
            _ => return Err(bad("line 3: expected `row,start,length`".into())),
        }
        let mut m = Self::new(w, h)?;
        for (i, l) in lines {
            let f = nums((i, l))?;
            let [y, start, len] = f[..] else {
                return Err(bad(format!("line {}: expected three fields", i + 1)));
            };
            if y >= h || start + len > w {
                return Err(bad(format!("line {}: run outside the mask", i + 1)));
            }
            for x in start..start + len {
                m.set(x, y, true);
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub pixel_count: usize,
    /// Mean member coordinate `(x, y)`.
    pub centroid: (f64, f64),
    pub bbox: BoundingBox,
    #[serde(skip)]
    pub pixels: Vec<(usize, usize)>,
}

/// Components sorted by size descending, ties broken by the top-left corner
/// of the bounding box (row first).
pub fn connected_components(mask: &ContactMask, connectivity: Connectivity) -> Vec<Component> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    const N4: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
    const N8: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
    let offsets: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &N4,
        Connectivity::Eight => &N8,
    };
    for start in 0..w * h {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        let mut bbox = BoundingBox {
            x0: usize::MAX,
            y0: usize::MAX,
            x1: 0,
            y1: 0,
        };
        let (mut sx, mut sy) = (0.0, 0.0);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            pixels.push((x, y));
            sx += x as f64;
            sy += y as f64;
            bbox.x0 = bbox.x0.min(x);
            bbox.y0 = bbox.y0.min(y);
            bbox.x1 = bbox.x1.max(x);
            bbox.y1 = bbox.y1.max(y);
            for &(dx, dy) in offsets {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.bits[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        let n = pixels.len();
        out.push(Component {
            pixel_count: n,
            centroid: (sx / n as f64, sy / n as f64),
            bbox,
            pixels,
        });
    }
    out.sort_by(|a, b| {
        b.pixel_count
            .cmp(&a.pixel_count)
            .then(a.bbox.y0.cmp(&b.bbox.y0))
            .then(a.bbox.x0.cmp(&b.bbox.x0))
    });
    out
}

/// Source-pixel rectangle of the raw frame that a map draws from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropRect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

/// Per-destination-pixel source coordinates. Pixel centres sit on integer
/// coordinates; `None` marks a destination pixel with no valid source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectifyMap {
    pub source_width: usize,
    pub source_height: usize,
    pub width: usize,
    pub height: usize,
    pub crop: CropRect,
    /// Output pixels per millimetre, when the map is metric.
    #[serde(default)]
    pub resolution: Option<f64>,
    pub coords: Vec<Option<[f64; 2]>>,
}

const SIDECAR_FORMAT: &str = "wedgesense-rectify-map";
const SIDECAR_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u32,
    #[serde(flatten)]
    map: RectifyMap,
}

impl RectifyMap {
    /// Build from a function of destination pixel; sources outside the raw
    /// frame are marked invalid.
    pub fn from_fn(
        source: (usize, usize),
        dest: (usize, usize),
        mut f: impl FnMut(usize, usize) -> Option<[f64; 2]>,
    ) -> Result<Self, ImagingError> {
        if source.0 == 0 || source.1 == 0 || dest.0 == 0 || dest.1 == 0 {
            return Err(ImagingError::ZeroDimensions);
        }
        let (sw, sh) = (source.0 as f64, source.1 as f64);
        let mut coords = Vec::with_capacity(dest.0 * dest.1);
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for y in 0..dest.1 {
            for x in 0..dest.0 {
                let c = f(x, y).filter(|c| c[0] >= 0.0 && c[1] >= 0.0 && c[0] <= sw - 1.0 && c[1] <= sh - 1.0);
                if let Some([cx, cy]) = c {
                    x0 = x0.min(cx);
                    y0 = y0.min(cy);
                    x1 = x1.max(cx);
                    y1 = y1.max(cy);
                }
                coords.push(c);
            }
        }
        let crop = if x0.is_finite() {
            CropRect {
                x: x0,
                y: y0,
                width: x1 - x0,
                height: y1 - y0,
            }
        } else {
            CropRect {
                x: 0.0,
                y: 0.0,
                width: 0.0,
                height: 0.0,
            }
        };
        Ok(Self {
            source_width: source.0,
            source_height: source.1,
            width: dest.0,
            height: dest.1,
            crop,
            resolution: None,
            coords,
        })
    }

    pub fn identity(width: usize, height: usize) -> Result<Self, ImagingError> {
        Self::from_fn((width, height), (width, height), |x, y| Some([x as f64, y as f64]))
    }

    /// Destination pixel `(x, y)` samples source `(x + dx, y + dy)`.
    pub fn translation(width: usize, height: usize, dx: f64, dy: f64) -> Result<Self, ImagingError> {
        Self::from_fn((width, height), (width, height), |x, y| Some([x as f64 + dx, y as f64 + dy]))
    }

    pub fn source(&self, x: usize, y: usize) -> Option<[f64; 2]> {
        self.coords[y * self.width + x]
    }

    /// Versioned JSON sidecar.
    pub fn to_sidecar(&self) -> String {
        serde_json::to_string(&Sidecar {
            format: SIDECAR_FORMAT.into(),
            version: SIDECAR_VERSION,
            map: self.clone(),
        })
        .expect("map serializes")
    }

    pub fn from_sidecar(text: &str) -> Result<Self, ImagingError> {
        let bad = |detail: String| ImagingError::Format {
            what: "rectify map",
            detail,
        };
        let car: Sidecar = serde_json::from_str(text).map_err(|e| bad(format!("line {}: {e}", e.line())))?;
        if car.format != SIDECAR_FORMAT {
            return Err(bad(format!("unknown format `{}`", car.format)));
        }
        if car.version != SIDECAR_VERSION {
            return Err(bad(format!("unsupported version {}", car.version)));
        }
        let m = car.map;
        if m.coords.len() != m.width * m.height || m.width == 0 || m.height == 0 {
            return Err(bad("coordinate table does not match dimensions".into()));
        }
        Ok(m)
    }
}

/// Bilinear sample at a sub-pixel source position.
pub fn sample_bilinear(img: &SensorImage, sx: f64, sy: f64) -> [u8; 3] {
    let (w, h) = img.dims();
    let x0 = (sx.floor() as usize).min(w - 1);
    let y0 = (sy.floor() as usize).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let (p00, p10, p01, p11) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
    let mut out = [0u8; 3];
    for k in 0..3 {
        let top = p00[k] as f64 * (1.0 - fx) + p10[k] as f64 * fx;
        let bot = p01[k] as f64 * (1.0 - fx) + p11[k] as f64 * fx;
        out[k] = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Resample `img` through `map`; invalid sources become black.
pub fn remap(img: &SensorImage, map: &RectifyMap) -> Result<SensorImage, ImagingError> {
    if img.dims() != (map.source_width, map.source_height) {
        return Err(ImagingError::DimensionMismatch {
            expected: (map.source_width, map.source_height),
            got: img.dims(),
        });
    }
    SensorImage::from_fn(map.width, map.height, |x, y| match map.source(x, y) {
        Some([sx, sy]) => sample_bilinear(img, sx, sy),
        None => [0; 3],
    })
}

/// Nearest-neighbour resampling of a mask through `map`.
pub fn remap_mask(mask: &ContactMask, map: &RectifyMap) -> Result<ContactMask, ImagingError> {
    if mask.dims() != (map.source_width, map.source_height) {
        return Err(ImagingError::DimensionMismatch {
            expected: (map.source_width, map.source_height),
            got: mask.dims(),
        });
    }
    ContactMask::from_fn(map.width, map.height, |x, y| match map.source(x, y) {
        Some([sx, sy]) => mask.get(sx.round() as usize, sy.round() as usize),
        None => false,
    })
}

/// Bounding box of the mask grown by `padding` on every side and clipped.
pub fn crop_around(img: &SensorImage, mask: &ContactMask, padding: usize) -> Result<SensorImage, ImagingError> {
    if img.dims() != mask.dims() {
        return Err(ImagingError::DimensionMismatch {
            expected: img.dims(),
            got: mask.dims(),
        });
    }
    let (w, h) = mask.dims();
    let mut bb: Option<BoundingBox> = None;
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                let b = bb.get_or_insert(BoundingBox { x0: x, y0: y, x1: x, y1: y });
                b.x0 = b.x0.min(x);
                b.x1 = b.x1.max(x);
                b.y1 = y;
            }
        }
    }
    let b = bb.ok_or(ImagingError::EmptyMask)?;
    let x0 = b.x0.saturating_sub(padding);
    let y0 = b.y0.saturating_sub(padding);
    let x1 = (b.x1 + padding).min(w - 1);
    let y1 = (b.y1 + padding).min(h - 1);
    img.sub_image(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> SensorImage {
        SensorImage::from_fn(7, 5, |x, y| [(x * 30) as u8, (y * 40) as u8, (x + y) as u8]).unwrap()
    }

    #[test]
    fn zero_dimensions_rejected() {
        assert!(SensorImage::new(0, 3).is_err());
        assert!(ContactMask::new(3, 0).is_err());
        assert!(SensorImage::from_raw(2, 2, vec![0; 11]).is_err());
    }

    #[test]
    fn stats_of_simple_images() {
        let zero = SensorImage::new(4, 4).unwrap();
        assert_eq!(mean_std(&zero, Channel::Gray), (0.0, 0.0));
        let check = SensorImage::from_fn(4, 4, |x, y| [((x + y) % 2 * 10) as u8; 3]).unwrap();
        let (m, s) = mean_std(&check, Channel::Gray);
        assert!((m - 5.0).abs() < 1e-12 && (s - 5.0).abs() < 1e-12);
        let (m, _) = mean_std(&ramp(), Channel::R);
        assert!((m - 90.0).abs() < 1e-12);
    }

    #[test]
    fn single_block_component() {
        let m = ContactMask::from_fn(20, 20, |x, y| (10..=12).contains(&x) && (10..=12).contains(&y)).unwrap();
        let cc = connected_components(&m, Connectivity::Eight);
        assert_eq!(cc.len(), 1);
        assert_eq!(cc[0].pixel_count, 9);
        assert_eq!(cc[0].centroid, (11.0, 11.0));
        assert!(connected_components(&ContactMask::new(5, 5).unwrap(), Connectivity::Four).is_empty());
    }

    #[test]
    fn diagonal_neighbours_depend_on_connectivity() {
        let m = ContactMask::from_fn(4, 4, |x, y| x == y).unwrap();
        assert_eq!(connected_components(&m, Connectivity::Four).len(), 4);
        assert_eq!(connected_components(&m, Connectivity::Eight).len(), 1);
    }

    #[test]
    fn component_order_is_size_then_position() {
        let m = ContactMask::from_fn(10, 10, |x, y| (x == 8 && y == 1) || (x == 1 && y == 1) || ((4..=5).contains(&x) && y >= 6)).unwrap();
        let cc = connected_components(&m, Connectivity::Four);
        assert_eq!(cc[0].pixel_count, 8);
        assert_eq!(cc[1].bbox.x0, 1);
        assert_eq!(cc[2].bbox.x0, 8);
    }

    #[test]
    fn identity_and_translation_remap() {
        let img = ramp();
        let id = RectifyMap::identity(7, 5).unwrap();
        assert_eq!(remap(&img, &id).unwrap(), img);
        let t = RectifyMap::translation(7, 5, 2.0, 0.0).unwrap();
        let out = remap(&img, &t).unwrap();
        for y in 0..5 {
            for x in 0..5 {
                assert_eq!(out.get(x, y), img.get(x + 2, y));
            }
            assert_eq!(out.get(5, y), [0; 3]);
            assert_eq!(out.get(6, y), [0; 3]);
        }
        assert!(remap(&SensorImage::new(3, 3).unwrap(), &id).is_err());
    }

    #[test]
    fn crop_single_pixel_with_padding() {
        let img = SensorImage::from_fn(12, 12, |x, y| [x as u8, y as u8, 0]).unwrap();
        let m = ContactMask::from_fn(12, 12, |x, y| x == 5 && y == 5).unwrap();
        let c = crop_around(&img, &m, 2).unwrap();
        assert_eq!(c.dims(), (5, 5));
        assert_eq!(c.get(2, 2), [5, 5, 0]);
        let full = ContactMask::from_fn(12, 12, |_, _| true).unwrap();
        assert_eq!(crop_around(&img, &full, 3).unwrap(), img);
        assert!(matches!(
            crop_around(&img, &ContactMask::new(12, 12).unwrap(), 1),
            Err(ImagingError::EmptyMask)
        ));
    }

    #[test]
    fn png_roundtrips() {
        let img = ramp();
        assert_eq!(SensorImage::decode_png(&img.encode_png().unwrap()).unwrap(), img);
        let m = ContactMask::from_fn(13, 7, |x, y| (x * 7 + y * 3) % 5 == 0).unwrap();
        assert_eq!(ContactMask::decode_png(&m.encode_png().unwrap()).unwrap(), m);
    }

    #[test]
    fn rle_roundtrip_and_errors() {
        let m = ContactMask::from_fn(9, 4, |x, y| x > y && x < 7).unwrap();
        let csv = m.to_rle_csv();
        assert_eq!(ContactMask::from_rle_csv(&csv).unwrap(), m);
        assert!(ContactMask::from_rle_csv("width,height\n3,3\nrow,start,length\n0,2,5\n").is_err());
        assert!(ContactMask::from_rle_csv("").is_err());
    }

    #[test]
    fn sidecar_roundtrip_and_version_check() {
        let map = RectifyMap::translation(6, 4, 0.5, -1.0).unwrap();
        let text = map.to_sidecar();
        assert_eq!(RectifyMap::from_sidecar(&text).unwrap(), map);
        let bumped = text.replace("\"version\":1", "\"version\":9");
        assert!(RectifyMap::from_sidecar(&bumped).is_err());
    }
}
