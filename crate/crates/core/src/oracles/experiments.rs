//! Reusable experiment setups shared by the validation suites.

use rand::Rng;

use super::{fd_radial_3d, fd_screened_poisson, fd_screened_poisson_with, h_point_2d, h_point_3d, FdOptions};
use crate::geometry::{dist, GridSpec};
use crate::rng;
use crate::Result;

/// `n` sources in `[-0.5, 0.5]^3`, pairwise more than `4 eps` apart.
pub fn random_sources(seed: u64, index: u64, n: usize, eps: f64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, "sources", index);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    while out.len() < n {
        let c: Vec<f64> = (0..3).map(|_| r.random_range(-0.5..0.5)).collect();
        if out.iter().all(|o| dist(o, &c) > 4.0 * eps) {
            out.push(c);
        }
    }
    out
}

/// Queries in `[-1, 1]^3` farther than `min_distance` from every source.
pub fn exterior_queries(seed: u64, index: u64, sources: &[Vec<f64>], count: usize, min_distance: f64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, "queries", index);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let q: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
        if sources.iter().all(|s| dist(s, &q) > min_distance) {
            out.push(q);
        }
    }
    out
}

/// Errors of the 2D finite-difference solve around a disk source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskComparison {
    /// Worst relative error at nodes at least 3 cells outside the source and
    /// at least `3 / lambda` inside the box.
    pub max_relative: f64,
    /// Worst absolute error over all free nodes.
    pub max_absolute: f64,
    pub spacing: f64,
}

/// Solve on `[-half, half]^2` with node spacing `spacing`. Nodes within one
/// cell of the disk take the closed form as Dirichlet data, so the comparison
/// isolates the stencil's discretisation error.
pub fn disk_fd_comparison(lambda: f64, eps: f64, half: f64, spacing: f64) -> Result<DiskComparison> {
    let n = (2.0 * half / spacing).round() as usize + 1;
    let spec = GridSpec::nodes(vec![-half, -half], vec![half, half], vec![n, n])?;
    let len = spec.len();
    let radius = |i: usize| {
        let p = spec.point(i);
        (p[0] * p[0] + p[1] * p[1]).sqrt()
    };
    let mut mask = vec![false; len];
    let mut values = vec![0.0; len];
    for i in 0..len {
        let r = radius(i);
        if r < eps + spacing {
            mask[i] = true;
            values[i] = h_point_2d(r.max(eps), eps, lambda)?;
        }
    }
    let g = fd_screened_poisson(&spec, &mask, &values, lambda)?;
    let mut max_relative: f64 = 0.0;
    let mut max_absolute: f64 = 0.0;
    for i in 0..len {
        if mask[i] {
            continue;
        }
        let p = spec.point(i);
        let r = radius(i);
        let exact = h_point_2d(r, eps, lambda)?;
        max_absolute = max_absolute.max((g.values[i] - exact).abs());
        let inner = p[0].abs().max(p[1].abs()) <= half - 3.0 / lambda;
        if inner && r >= eps + 3.0 * spacing {
            max_relative = max_relative.max(((g.values[i] - exact) / exact).abs());
        }
    }
    Ok(DiskComparison { max_relative, max_absolute, spacing })
}

/// Worst relative error of the radial solve on `[eps, 3]` against the 3D closed form.
pub fn radial_fd_comparison(eps: f64, lambda: f64, nodes: usize) -> Result<f64> {
    let (r, h) = fd_radial_3d(eps, lambda, 1.0, 3.0, nodes)?;
    let mut worst: f64 = 0.0;
    for (ri, hi) in r.iter().zip(&h) {
        let exact = h_point_3d(*ri, eps, lambda, 1.0)?;
        worst = worst.max(((hi - exact) / exact).abs());
    }
    Ok(worst)
}

/// Distance recovered from a finite-difference solve with `h = 1` on a
/// segment, compared with the exact distance to the segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentComparison {
    pub checked: usize,
    pub violations: usize,
    pub worst_excess: f64,
}

/// Segment from `(-0.3, 0)` to `(0.3, 0)` on `[-1, 1]^2`. Each node farther than
/// two cells from the segment, within `0.75` of it and `3 / lambda` from the
/// box edge must satisfy
/// `| -ln(h)/lambda - d | <= |ln(dx / d)| / lambda + 2 dx`.
pub fn segment_varadhan_comparison(lambda: f64, spacing: f64) -> Result<SegmentComparison> {
    let half = 1.0;
    let n = (2.0 * half / spacing).round() as usize + 1;
    let spec = GridSpec::nodes(vec![-half, -half], vec![half, half], vec![n, n])?;
    let seg_dist = |p: &[f64]| {
        let x = p[0].clamp(-0.3, 0.3);
        ((p[0] - x).powi(2) + p[1] * p[1]).sqrt()
    };
    let len = spec.len();
    let mask: Vec<bool> = (0..len).map(|i| seg_dist(&spec.point(i)) <= 0.5 * spacing).collect();
    // Tight tolerance so heat values near e^-15 keep their relative accuracy.
    let opts = FdOptions { tolerance: 1e-14, ..FdOptions::default() };
    let g = fd_screened_poisson_with(&spec, &mask, &vec![1.0; len], lambda, opts)?;
    let mut out = SegmentComparison { checked: 0, violations: 0, worst_excess: f64::NEG_INFINITY };
    for i in 0..len {
        let p = spec.point(i);
        let d = seg_dist(&p);
        if d <= 2.0 * spacing || d > 0.75 || p[0].abs().max(p[1].abs()) > half - 3.0 / lambda {
            continue;
        }
        let recovered = -g.values[i].ln() / lambda;
        let allowed = (spacing / d).ln().abs() / lambda + 2.0 * spacing;
        let excess = (recovered - d).abs() - allowed;
        out.checked += 1;
        out.worst_excess = out.worst_excess.max(excess);
        if !(excess <= 0.0) {
            out.violations += 1;
        }
    }
    Ok(out)
}
