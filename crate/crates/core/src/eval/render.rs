use std::fmt::Write as _;
use std::path::Path;

use super::TraceResult;
use crate::geometry::ScalarGrid;
use crate::{Error, Result};

/// RGB image, row-major from the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }
}

/// Binary PPM (P6) bytes.
pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for p in &img.pixels {
        out.extend_from_slice(p);
    }
    out
}

pub fn write_ppm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_ppm(img))?;
    Ok(())
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Diverging colour: white at 0, red for positive, blue for negative, `s in [-1, 1]`.
fn diverging(s: f64) -> [u8; 3] {
    let fade = to_byte(1.0 - s.abs());
    if s >= 0.0 {
        [255, fade, fade]
    } else {
        [fade, fade, 255]
    }
}

/// Heatmap of a 2D grid (3D grids use the middle slice along the last axis),
/// scaled by the largest magnitude, with black pixels where the sign changes
/// to the right or below.
pub fn sdf_heatmap(grid: &ScalarGrid) -> Result<Image> {
    let spec = &grid.spec;
    let d = spec.dim();
    if d != 2 && d != 3 {
        return Err(Error::invalid("heatmaps need a 2D or 3D grid"));
    }
    let (w, h) = (spec.res[0], spec.res[1]);
    let strides = spec.strides();
    let slice = if d == 3 { spec.res[2] / 2 * strides[2] } else { 0 };
    // Pixel (x, y) shows grid index (x, h - 1 - y) so +y points up.
    let value = |x: usize, y: usize| grid.values[x * strides[0] + (h - 1 - y) * strides[1] + slice];
    let scale = (0..w * h).map(|i| value(i % w, i / w).abs()).fold(0.0f64, f64::max);
    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let v = value(x, y);
            let crosses = |o: f64| (v < 0.0 && o > 0.0) || (v > 0.0 && o < 0.0);
            let edge = (x + 1 < w && crosses(value(x + 1, y))) || (y + 1 < h && crosses(value(x, y + 1)));
            pixels.push(if edge {
                [0, 0, 0]
            } else if scale > 0.0 {
                diverging(v / scale)
            } else {
                [255, 255, 255]
            });
        }
    }
    Ok(Image { width: w, height: h, pixels })
}

/// Grey level `255 * iterations / max_steps`, rounded.
pub fn iteration_map(trace: &TraceResult) -> Image {
    let pixels = trace
        .iterations
        .iter()
        .map(|&it| {
            let g = (255.0 * it as f64 / trace.max_steps.max(1) as f64).round().min(255.0) as u8;
            [g, g, g]
        })
        .collect();
    Image { width: trace.width, height: trace.height, pixels }
}

/// Near hits bright, far hits dark, misses black.
pub fn depth_map(trace: &TraceResult) -> Image {
    let hits = trace.depth.iter().copied().filter(|d| d.is_finite());
    let (lo, hi) = hits.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), d| (a.min(d), b.max(d)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let pixels = trace
        .depth
        .iter()
        .map(|&d| {
            if d.is_finite() {
                let g = to_byte(1.0 - 0.8 * (d - lo) / span);
                [g, g, g]
            } else {
                [0, 0, 0]
            }
        })
        .collect();
    Image { width: trace.width, height: trace.height, pixels }
}

/// Normals mapped from `[-1, 1]` to `[0, 255]` per channel; misses black.
pub fn normal_map(trace: &TraceResult) -> Image {
    let pixels = (0..trace.len())
        .map(|i| {
            if trace.hit[i] {
                let n = trace.normals[i];
                [to_byte((n[0] + 1.0) / 2.0), to_byte((n[1] + 1.0) / 2.0), to_byte((n[2] + 1.0) / 2.0)]
            } else {
                [0, 0, 0]
            }
        })
        .collect();
    Image { width: trace.width, height: trace.height, pixels }
}

/// `iterations,count` for every count from 0 to `max_steps`.
pub fn iteration_histogram_csv(trace: &TraceResult) -> String {
    let mut counts = vec![0usize; trace.max_steps as usize + 1];
    for &it in &trace.iterations {
        counts[(it as usize).min(trace.max_steps as usize)] += 1;
    }
    let mut s = String::from("iterations,count\n");
    for (i, c) in counts.iter().enumerate() {
        let _ = writeln!(s, "{i},{c}");
    }
    s
}
