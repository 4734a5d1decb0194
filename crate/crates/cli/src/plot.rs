//! Minimal line charts rendered straight into an RGB raster.

use wedgesense::imaging::SensorImage;

const W: usize = 480;
const H: usize = 320;
const LEFT: usize = 56;
const RIGHT: usize = 16;
const TOP: usize = 16;
const BOTTOM: usize = 36;

const BG: [u8; 3] = [255, 255, 255];
const AXIS: [u8; 3] = [40, 40, 40];
const GRID: [u8; 3] = [225, 225, 225];
pub const BLUE: [u8; 3] = [31, 119, 180];
pub const ORANGE: [u8; 3] = [255, 127, 14];

/// 3x5 glyphs for tick labels.
fn glyph(c: char) -> Option<[u8; 5]> {
    Some(match c {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b010, 0b010, 0b010],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        '-' => [0b000, 0b000, 0b111, 0b000, 0b000],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        'e' => [0b000, 0b111, 0b111, 0b100, 0b111],
        _ => return None,
    })
}

struct Canvas {
    img: SensorImage,
}

impl Canvas {
    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < W && (y as usize) < H {
            self.img.set(x as usize, y as usize, c);
        }
    }

    fn line(&mut self, (x0, y0): (f64, f64), (x1, y1): (f64, f64), c: [u8; 3]) {
        let n = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
        for k in 0..=n {
            let t = k as f64 / n as f64;
            let x = (x0 + t * (x1 - x0)).round() as i64;
            let y = (y0 + t * (y1 - y0)).round() as i64;
            self.put(x, y, c);
            self.put(x, y + 1, c);
        }
    }

    fn text(&mut self, s: &str, x: i64, y: i64, c: [u8; 3]) {
        const SCALE: i64 = 2;
        for (i, ch) in s.chars().enumerate() {
            let Some(g) = glyph(ch) else { continue };
            for (row, bits) in g.iter().enumerate() {
                for col in 0..3 {
                    if bits >> (2 - col) & 1 == 1 {
                        for dy in 0..SCALE {
                            for dx in 0..SCALE {
                                self.put(x + (i as i64 * 4 + col) * SCALE + dx, y + row as i64 * SCALE + dy, c);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-2..1e5).contains(&a) {
        return format!("{v:.1e}").replace('+', "");
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

pub type Series<'a> = (&'a [(f64, f64)], [u8; 3]);

/// Line chart of one or more `(x, y)` series with min/max tick labels.
pub fn line_chart(series: &[Series]) -> SensorImage {
    let mut cv = Canvas {
        img: SensorImage::from_fn(W, H, |_, _| BG).expect("fixed plot size"),
    };
    let (x0, x1) = range(series.iter().flat_map(|(s, _)| s.iter().map(|p| p.0)));
    let (y0, y1) = range(series.iter().flat_map(|(s, _)| s.iter().map(|p| p.1)));
    let (pw, ph) = ((W - LEFT - RIGHT) as f64, (H - TOP - BOTTOM) as f64);
    let px = |x: f64| LEFT as f64 + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP as f64 + (1.0 - (y - y0) / (y1 - y0)) * ph;

    for k in 0..=4 {
        let gy = TOP as f64 + ph * k as f64 / 4.0;
        cv.line((LEFT as f64, gy), ((W - RIGHT) as f64, gy), GRID);
    }
    cv.line((LEFT as f64, TOP as f64), (LEFT as f64, (H - BOTTOM) as f64), AXIS);
    cv.line((LEFT as f64, (H - BOTTOM) as f64), ((W - RIGHT) as f64, (H - BOTTOM) as f64), AXIS);

    for (pts, color) in series {
        for w in pts.windows(2) {
            cv.line((px(w[0].0), py(w[0].1)), (px(w[1].0), py(w[1].1)), *color);
        }
        for &(x, y) in pts.iter() {
            let (cx, cy) = (px(x).round() as i64, py(y).round() as i64);
            for dy in -2..=2 {
                for dx in -2..=2 {
                    cv.put(cx + dx, cy + dy, *color);
                }
            }
        }
    }

    let (ylo, yhi) = (label(y0), label(y1));
    cv.text(&yhi, 4, TOP as i64 - 4, AXIS);
    cv.text(&ylo, 4, (H - BOTTOM) as i64 - 6, AXIS);
    let (xlo, xhi) = (label(x0), label(x1));
    cv.text(&xlo, LEFT as i64 - 4, (H - BOTTOM) as i64 + 10, AXIS);
    cv.text(&xhi, (W - RIGHT) as i64 - 8 * xhi.len() as i64, (H - BOTTOM) as i64 + 10, AXIS);
    cv.img
}
