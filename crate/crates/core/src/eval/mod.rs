//! Measurement: grid evaluation, occupancy IoU, Chamfer and Hausdorff
//! distances, SDF error metrics, sphere tracing and image output.
//!
//! SMAPE is `mean(|p - g| / ((|p| + |g|) / 2 + 1e-8))`, so it ranges over `[0, 2]`.

mod render;
mod trace;

pub use render::{
    depth_map, encode_ppm, iteration_histogram_csv, iteration_map, normal_map, sdf_heatmap, write_ppm, Image,
};
pub use trace::{analytic_sphere_depth, pose_ring, sphere_trace, Camera, TraceOptions, TraceResult, TraceStats};

use std::fmt::Write as _;

use rand::Rng;

use crate::field::NeuralField;
use crate::geometry::{dist, extract_level_set, sample_boundary, signed_distance_oracle, GridSpec, LevelSet, PointCloud, ScalarGrid, Shape};
use crate::trainer::fmt9;
use crate::{rng, Error, Result};

const SMAPE_DELTA: f64 = 1e-8;
/// Points per field evaluation call, bounding memory on large grids.
const EVAL_BLOCK: usize = 1 << 16;

/// Field values at the cell centers of `spec`.
pub fn grid_eval(field: &NeuralField, spec: &GridSpec) -> Result<ScalarGrid> {
    if spec.dim() != field.dim() {
        return Err(Error::invalid(format!(
            "grid dimension {} differs from the field dimension {}",
            spec.dim(),
            field.dim()
        )));
    }
    let d = spec.dim();
    let mut values = Vec::with_capacity(spec.len());
    let mut start = 0;
    while start < spec.len() {
        let end = (start + EVAL_BLOCK).min(spec.len());
        let pts: Vec<f64> = (start..end).flat_map(|i| spec.point(i)).collect();
        debug_assert_eq!(pts.len(), (end - start) * d);
        values.extend(field.forward_batch(&pts));
        start = end;
    }
    ScalarGrid::new(spec.clone(), values)
}

fn same_spec(a: &ScalarGrid, b: &ScalarGrid) -> Result<()> {
    if a.spec != b.spec {
        return Err(Error::invalid("grids have different specifications"));
    }
    Ok(())
}

/// Intersection over union of the occupancies `value < 0`; 1 when both are empty.
pub fn iou(pred: &ScalarGrid, gt: &ScalarGrid) -> Result<f64> {
    same_spec(pred, gt)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (p, g) in pred.values.iter().zip(&gt.values) {
        let (a, b) = (*p < 0.0, *g < 0.0);
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Nearest-neighbour index over a point set, bucketed on a uniform grid.
pub struct NearestIndex<'a> {
    points: &'a PointCloud,
    lower: Vec<f64>,
    cell: f64,
    res: Vec<usize>,
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> NearestIndex<'a> {
    pub fn new(points: &'a PointCloud) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("nearest-neighbour index needs a nonempty set"));
        }
        let d = points.dim();
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for p in points.iter() {
            for a in 0..d {
                lower[a] = lower[a].min(p[a]);
                upper[a] = upper[a].max(p[a]);
            }
        }
        let extent = (0..d).map(|a| upper[a] - lower[a]).fold(0.0f64, f64::max).max(1e-12);
        // About 4n cells in total.
        let per_axis = (4.0 * points.len() as f64).powf(1.0 / d as f64).clamp(1.0, 4096.0);
        let cell = extent / per_axis;
        let res: Vec<usize> = (0..d).map(|a| (((upper[a] - lower[a]) / cell).floor() as usize + 1).max(1)).collect();
        let total: usize = res.iter().product();
        let mut counts = vec![0usize; total + 1];
        let keys: Vec<usize> = points.iter().map(|p| Self::key(&lower, cell, &res, p)).collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for i in 0..total {
            counts[i + 1] += counts[i];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut order = vec![0; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            order[fill[k]] = i;
            fill[k] += 1;
        }
        Ok(NearestIndex { points, lower, cell, res, starts, order })
    }

    fn cell_of(lower: &[f64], cell: f64, res: &[usize], p: &[f64]) -> Vec<usize> {
        (0..res.len()).map(|a| (((p[a] - lower[a]) / cell).floor().max(0.0) as usize).min(res[a] - 1)).collect()
    }

    fn key(lower: &[f64], cell: f64, res: &[usize], p: &[f64]) -> usize {
        Self::cell_of(lower, cell, res, p).iter().zip(res).fold(0, |k, (&i, &r)| k * r + i)
    }

    /// Distance from `q` to the nearest indexed point.
    pub fn nearest(&self, q: &[f64]) -> f64 {
        let d = self.res.len();
        let c = Self::cell_of(&self.lower, self.cell, &self.res, q);
        let max_ring = *self.res.iter().max().unwrap();
        let mut best = f64::INFINITY;
        let mut idx = vec![0isize; d];
        for k in 0..=max_ring as isize {
            // Visit cells at Chebyshev distance exactly k from c.
            let span = 2 * k + 1;
            let count = (span as usize).pow(d as u32);
            for m in 0..count {
                let mut rem = m;
                let mut on_shell = false;
                let mut valid = true;
                for a in 0..d {
                    let off = (rem % span as usize) as isize - k;
                    rem /= span as usize;
                    on_shell |= off.abs() == k;
                    let i = c[a] as isize + off;
                    valid &= i >= 0 && i < self.res[a] as isize;
                    idx[a] = i;
                }
                if !on_shell || !valid {
                    continue;
                }
                let key = idx.iter().zip(&self.res).fold(0usize, |acc, (&i, &r)| acc * r + i as usize);
                for &j in &self.order[self.starts[key]..self.starts[key + 1]] {
                    best = best.min(dist(q, self.points.point(j)));
                }
            }
            // Unvisited cells are at least k cells away from the query's cell.
            if best <= k as f64 * self.cell {
                break;
            }
        }
        best
    }
}

fn nearest_distances(from: &PointCloud, to: &PointCloud) -> Result<Vec<f64>> {
    let index = NearestIndex::new(to)?;
    Ok(crate::parallel::install(|| {
        use rayon::prelude::*;
        (0..from.len()).into_par_iter().map(|i| index.nearest(from.point(i))).collect()
    }))
}

/// Chamfer and Hausdorff distances between two point sets. With `one_sided`
/// only the `a -> b` halves are returned.
pub fn chamfer_hausdorff(a: &PointCloud, b: &PointCloud, one_sided: bool) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Chamfer distance needs two nonempty sets"));
    }
    if a.dim() != b.dim() {
        return Err(Error::invalid("point sets have different dimensions"));
    }
    let ab = nearest_distances(a, b)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(*x));
    if one_sided {
        return Ok((mean(&ab), max(&ab)));
    }
    let ba = nearest_distances(b, a)?;
    Ok((0.5 * (mean(&ab) + mean(&ba)), max(&ab).max(max(&ba))))
}

/// Brute-force reference for [`chamfer_hausdorff`].
pub fn chamfer_hausdorff_brute(a: &PointCloud, b: &PointCloud, one_sided: bool) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Chamfer distance needs two nonempty sets"));
    }
    let side = |x: &PointCloud, y: &PointCloud| -> Vec<f64> {
        x.iter().map(|p| y.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min)).collect()
    };
    let ab = side(a, b);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(*x));
    if one_sided {
        return Ok((mean(&ab), max(&ab)));
    }
    let ba = side(b, a);
    Ok((0.5 * (mean(&ab) + mean(&ba)), max(&ab).max(max(&ba))))
}

/// `n` points drawn uniformly with respect to length (2D) or area (3D) of a level set.
pub fn sample_level_set(set: &LevelSet, n: usize, seed: u64) -> Result<PointCloud> {
    if set.is_empty() {
        return Err(Error::invalid("cannot sample an empty level set"));
    }
    let measures = set.element_measures();
    let mut cum = Vec::with_capacity(measures.len());
    let mut acc = 0.0;
    for m in &measures {
        acc += m;
        cum.push(acc);
    }
    let d = set.dim;
    let mut r = rng::stream(seed, "level-set-sample", 0);
    let mut out = Vec::with_capacity(n * d);
    for _ in 0..n {
        let t = r.random::<f64>() * acc;
        let e = &set.elements[cum.partition_point(|&c| c < t).min(cum.len() - 1)];
        let v = |i: usize| &set.vertices[e[i]];
        if e.len() == 2 {
            let s: f64 = r.random();
            out.extend((0..d).map(|k| v(0)[k] + s * (v(1)[k] - v(0)[k])));
        } else {
            let (s1, s2): (f64, f64) = (r.random::<f64>().sqrt(), r.random());
            let (w0, w1, w2) = (1.0 - s1, s1 * (1.0 - s2), s1 * s2);
            out.extend((0..d).map(|k| w0 * v(0)[k] + w1 * v(1)[k] + w2 * v(2)[k]));
        }
    }
    PointCloud::new(d, out)
}

/// RMSE, MAE and SMAPE over a set of cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub rmse: f64,
    pub mae: f64,
    pub smape: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdfMetrics {
    pub full: ErrorStats,
    /// Restricted to `|g| < near_threshold`; absent when no cell qualifies.
    pub near: Option<ErrorStats>,
}

fn error_stats(pairs: impl Iterator<Item = (f64, f64)>) -> Option<ErrorStats> {
    let (mut n, mut sq, mut ab, mut sm) = (0usize, 0.0, 0.0, 0.0);
    for (p, g) in pairs {
        let e = (p - g).abs();
        n += 1;
        sq += e * e;
        ab += e;
        sm += e / ((p.abs() + g.abs()) / 2.0 + SMAPE_DELTA);
    }
    (n > 0).then(|| ErrorStats { rmse: (sq / n as f64).sqrt(), mae: ab / n as f64, smape: sm / n as f64 })
}

pub fn sdf_metrics(pred: &ScalarGrid, gt: &ScalarGrid, near_threshold: f64) -> Result<SdfMetrics> {
    same_spec(pred, gt)?;
    let pairs = || pred.values.iter().copied().zip(gt.values.iter().copied());
    let full = error_stats(pairs()).ok_or_else(|| Error::invalid("empty grid"))?;
    let near = error_stats(pairs().filter(|(_, g)| g.abs() < near_threshold));
    Ok(SdfMetrics { full, near })
}

/// Settings for [`evaluate_field`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Cells per axis of the evaluation grid.
    pub res: usize,
    /// The grid covers `[-half, half]^d`.
    pub half: f64,
    pub near_threshold: f64,
    /// Points sampled from each surface for Chamfer and Hausdorff.
    pub samples: usize,
    pub seed: u64,
}

impl EvalConfig {
    /// 256^2 in 2D, 128^3 in 3D, on `[-1, 1]^d`.
    pub fn default_for(dim: usize) -> Self {
        EvalConfig { res: if dim == 3 { 128 } else { 256 }, half: 1.0, near_threshold: 0.1, samples: 10_000, seed: 0 }
    }

    pub fn spec(&self, dim: usize) -> GridSpec {
        GridSpec::cube(dim, self.half, self.res)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub resolution: usize,
    pub iou: f64,
    /// Infinite when the predicted zero level set is empty.
    pub chamfer: f64,
    pub hausdorff: f64,
    pub sdf: SdfMetrics,
    pub trace: Option<TraceStats>,
}

impl MetricsReport {
    fn entries(&self) -> Vec<(&'static str, Option<f64>)> {
        let near = self.sdf.near;
        let mut v = vec![
            ("iou", Some(self.iou)),
            ("chamfer", Some(self.chamfer)),
            ("hausdorff", Some(self.hausdorff)),
            ("rmse", Some(self.sdf.full.rmse)),
            ("mae", Some(self.sdf.full.mae)),
            ("smape", Some(self.sdf.full.smape)),
            ("rmse_near", near.map(|n| n.rmse)),
            ("mae_near", near.map(|n| n.mae)),
            ("smape_near", near.map(|n| n.smape)),
        ];
        if let Some(t) = &self.trace {
            v.extend([
                ("trace_mean_iterations", Some(t.mean_iterations)),
                ("trace_median_iterations", Some(t.median_iterations)),
                ("trace_max_iterations", Some(t.max_iterations as f64)),
                ("trace_hit_ratio", Some(t.hit_ratio)),
            ]);
        }
        v
    }

    /// `metric,value` rows; absent values are written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut s = format!("metric,value\nresolution,{}\n", self.resolution);
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k},{}", v.map_or("NA".to_string(), fmt9));
        }
        s
    }

    /// One line of `key=value` pairs.
    pub fn summary_line(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k}={}", v.map_or("NA".to_string(), fmt9)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Compare a field with the exact signed distance of `shape`. The predicted
/// surface points come from the extracted zero level set, the reference
/// points from exact boundary sampling.
pub fn evaluate_field(field: &NeuralField, shape: &Shape, cfg: &EvalConfig) -> Result<MetricsReport> {
    let d = shape.dim();
    let spec = cfg.spec(d);
    let pred = grid_eval(field, &spec)?;
    let gt = gt_grid(shape, &spec)?;
    let reference = sample_boundary(shape, cfg.samples, cfg.seed);
    evaluate_grids(&pred, &gt, &reference, cfg)
}

/// Exact signed distance of `shape` at the cell centers of `spec`.
pub fn gt_grid(shape: &Shape, spec: &GridSpec) -> Result<ScalarGrid> {
    let values = crate::parallel::install(|| {
        use rayon::prelude::*;
        (0..spec.len()).into_par_iter().map(|i| signed_distance_oracle(shape, &spec.point(i))).collect::<Result<Vec<_>>>()
    })?;
    ScalarGrid::new(spec.clone(), values)
}

/// Metrics from precomputed grids and reference surface points.
pub fn evaluate_grids(pred: &ScalarGrid, gt: &ScalarGrid, reference: &PointCloud, cfg: &EvalConfig) -> Result<MetricsReport> {
    let iou = iou(pred, gt)?;
    let sdf = sdf_metrics(pred, gt, cfg.near_threshold)?;
    let set = extract_level_set(pred, 0.0)?;
    let (chamfer, hausdorff) = if set.is_empty() {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let ours = sample_level_set(&set, cfg.samples, cfg.seed)?;
        chamfer_hausdorff(&ours, reference, false)?
    };
    Ok(MetricsReport { resolution: pred.spec.res[0], iou, chamfer, hausdorff, sdf, trace: None })
}

#[cfg(test)]
mod tests;
