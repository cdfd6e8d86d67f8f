use crate::field::NeuralField;
use crate::geometry::{signed_distance_oracle, Shape};
use crate::{Error, Result};

type V3 = [f64; 3];

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn unit(a: V3) -> V3 {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Pinhole camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub position: V3,
    pub look_at: V3,
    pub up: V3,
    /// Vertical field of view in degrees.
    pub fov_deg: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(position: V3, look_at: V3, up: V3, fov_deg: f64, width: usize, height: usize) -> Result<Self> {
        let fwd = sub(look_at, position);
        if dot(fwd, fwd) == 0.0 {
            return Err(Error::invalid("camera position equals its look-at point"));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("camera resolution must be at least 1"));
        }
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(Error::invalid("field of view must lie in (0, 180) degrees"));
        }
        if dot(cross(fwd, up), cross(fwd, up)) == 0.0 {
            return Err(Error::invalid("camera up vector is parallel to the view direction"));
        }
        Ok(Camera { position, look_at, up, fov_deg, width, height })
    }

    /// Unit direction through the center of pixel `(x, y)`, row 0 at the top.
    pub fn ray(&self, x: usize, y: usize) -> V3 {
        let fwd = unit(sub(self.look_at, self.position));
        let right = unit(cross(fwd, self.up));
        let up = cross(right, fwd);
        let half = (self.fov_deg.to_radians() / 2.0).tan();
        let aspect = self.width as f64 / self.height as f64;
        let sx = ((x as f64 + 0.5) / self.width as f64 * 2.0 - 1.0) * half * aspect;
        let sy = (1.0 - (y as f64 + 0.5) / self.height as f64 * 2.0) * half;
        unit([
            fwd[0] + sx * right[0] + sy * up[0],
            fwd[1] + sx * right[1] + sy * up[1],
            fwd[2] + sx * right[2] + sy * up[2],
        ])
    }
}

/// `count` cameras on a horizontal circle of `radius` at `height` above the
/// origin, looking at the origin with `z` up, 60 degree field of view.
pub fn pose_ring(count: usize, radius: f64, height: f64, resolution: usize) -> Result<Vec<Camera>> {
    (0..count)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            Camera::new([radius * th.cos(), radius * th.sin(), height], [0.0; 3], [0.0, 0.0, 1.0], 60.0, resolution, resolution)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub max_steps: u32,
    pub threshold: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { max_steps: 30, threshold: 5e-5 }
    }
}

/// Something a ray can march through.
pub trait TraceTarget {
    fn values(&self, points: &[f64]) -> Vec<f64>;
    /// Gradients, three per point.
    fn gradients(&self, points: &[f64]) -> Vec<f64>;
}

impl TraceTarget for NeuralField {
    fn values(&self, points: &[f64]) -> Vec<f64> {
        self.forward_batch(points)
    }

    fn gradients(&self, points: &[f64]) -> Vec<f64> {
        self.eval_batch(points).grads
    }
}

impl TraceTarget for Shape {
    fn values(&self, points: &[f64]) -> Vec<f64> {
        points.chunks_exact(3).map(|p| signed_distance_oracle(self, p).unwrap_or(f64::NAN)).collect()
    }

    /// Central differences.
    fn gradients(&self, points: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        let mut out = Vec::with_capacity(points.len());
        for p in points.chunks_exact(3) {
            for a in 0..3 {
                let (mut hi, mut lo) = (p.to_vec(), p.to_vec());
                hi[a] += h;
                lo[a] -= h;
                let f = |x: &[f64]| signed_distance_oracle(self, x).unwrap_or(f64::NAN);
                out.push((f(&hi) - f(&lo)) / (2.0 * h));
            }
        }
        out
    }
}

/// Per-pixel outcome, row-major with row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    pub width: usize,
    pub height: usize,
    pub max_steps: u32,
    pub iterations: Vec<u32>,
    pub hit: Vec<bool>,
    /// Whether the ray met the unit sphere at all.
    pub entered: Vec<bool>,
    /// Whether the ray left the unit sphere moving outward.
    pub diverged: Vec<bool>,
    /// Ray parameter from the camera at the hit; infinite otherwise.
    pub depth: Vec<f64>,
    /// Unit normals at hits; zero otherwise.
    pub normals: Vec<V3>,
}

/// Iteration statistics over rays that met the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStats {
    pub mean_iterations: f64,
    pub median_iterations: f64,
    pub max_iterations: u32,
    pub hit_ratio: f64,
}

impl TraceResult {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> TraceStats {
        let mut its: Vec<u32> = (0..self.len()).filter(|&i| self.entered[i]).map(|i| self.iterations[i]).collect();
        if its.is_empty() {
            return TraceStats { mean_iterations: 0.0, median_iterations: 0.0, max_iterations: 0, hit_ratio: 0.0 };
        }
        its.sort_unstable();
        let n = its.len();
        let median = if n % 2 == 1 { its[n / 2] as f64 } else { (its[n / 2 - 1] + its[n / 2]) as f64 / 2.0 };
        let hits = (0..self.len()).filter(|&i| self.entered[i] && self.hit[i]).count();
        TraceStats {
            mean_iterations: its.iter().map(|&v| v as f64).sum::<f64>() / n as f64,
            median_iterations: median,
            max_iterations: *its.last().unwrap(),
            hit_ratio: hits as f64 / n as f64,
        }
    }
}

/// March every pixel's ray by the field value, starting where the ray enters
/// the unit sphere. A ray stops on `|u| < threshold` (hit), on leaving the
/// unit sphere outward (divergence) or after `max_steps` evaluations.
pub fn sphere_trace(target: &dyn TraceTarget, camera: &Camera, opts: TraceOptions) -> TraceResult {
    let n = camera.width * camera.height;
    let o = camera.position;
    let dirs: Vec<V3> = (0..n).map(|i| camera.ray(i % camera.width, i / camera.width)).collect();
    let mut res = TraceResult {
        width: camera.width,
        height: camera.height,
        max_steps: opts.max_steps,
        iterations: vec![0; n],
        hit: vec![false; n],
        entered: vec![false; n],
        diverged: vec![false; n],
        depth: vec![f64::INFINITY; n],
        normals: vec![[0.0; 3]; n],
    };
    let mut t = vec![0.0; n];
    let mut active = Vec::new();
    for (i, d) in dirs.iter().enumerate() {
        let b = dot(o, *d);
        let c = dot(o, o) - 1.0;
        let disc = b * b - c;
        if disc < 0.0 || (c > 0.0 && b > 0.0) {
            res.diverged[i] = true;
            continue;
        }
        res.entered[i] = true;
        t[i] = (-b - disc.sqrt()).max(0.0);
        active.push(i);
    }
    let at = |i: usize, ti: f64| -> V3 {
        let d = dirs[i];
        [o[0] + ti * d[0], o[1] + ti * d[1], o[2] + ti * d[2]]
    };
    while !active.is_empty() {
        let pts: Vec<f64> = active.iter().flat_map(|&i| at(i, t[i])).collect();
        let u = target.values(&pts);
        let mut next = Vec::with_capacity(active.len());
        for (k, &i) in active.iter().enumerate() {
            res.iterations[i] += 1;
            if u[k].abs() < opts.threshold {
                res.hit[i] = true;
                res.depth[i] = t[i];
                continue;
            }
            if !u[k].is_finite() {
                continue;
            }
            t[i] += u[k];
            let p = at(i, t[i]);
            if dot(p, p) > 1.0 && dot(p, dirs[i]) > 0.0 {
                res.diverged[i] = true;
                continue;
            }
            if res.iterations[i] < opts.max_steps {
                next.push(i);
            }
        }
        active = next;
    }
    let hits: Vec<usize> = (0..n).filter(|&i| res.hit[i]).collect();
    let pts: Vec<f64> = hits.iter().flat_map(|&i| at(i, t[i])).collect();
    let g = target.gradients(&pts);
    for (k, &i) in hits.iter().enumerate() {
        let v = [g[3 * k], g[3 * k + 1], g[3 * k + 2]];
        if dot(v, v) > 0.0 {
            res.normals[i] = unit(v);
        }
    }
    res
}

/// Camera-to-surface distance along pixel `(x, y)` for a sphere, if the ray hits.
pub fn analytic_sphere_depth(camera: &Camera, x: usize, y: usize, center: V3, radius: f64) -> Option<f64> {
    let d = camera.ray(x, y);
    let oc = sub(camera.position, center);
    let b = dot(oc, d);
    let c = dot(oc, oc) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}
