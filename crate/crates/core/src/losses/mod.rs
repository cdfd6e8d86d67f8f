//! Monte Carlo estimators of the loss terms, the uniform + Gaussian
//! importance sampler, and per-quantity schedules.
//!
//! Volume integrals over the box `Omega` are estimated as
//! `sum_i 1[x_i in Omega] f(x_i) / (n pdf(x_i))`, with `pdf` the exact density
//! of the sampling mixture. Each estimator has a companion that accumulates
//! `weight * dL/du` and `weight * dL/d(grad u)` into an [`Adjoints`] buffer.

mod schedule;

pub use schedule::{schedule_eval, Schedule};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::field::{Adjoints, BatchEval};
use crate::geometry::PointCloud;
use crate::rng;
use crate::{Error, Result};

/// Axis-aligned integration domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() || lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::invalid("domain needs lower < upper in every coordinate"));
        }
        Ok(Domain { lower, upper })
    }

    /// `[-half, half]^dim`
    pub fn cube(dim: usize, half: f64) -> Self {
        Domain { lower: vec![-half; dim], upper: vec![half; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *v >= *l && *v <= *u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    Uniform,
    Gaussian,
}

/// Integration samples with their mixture density.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeBatch {
    pub dim: usize,
    pub points: Vec<f64>,
    pub pdf: Vec<f64>,
    pub kinds: Vec<SampleKind>,
    /// Whether each point lies in the integration domain.
    pub inside: Vec<bool>,
}

impl VolumeBatch {
    pub fn len(&self) -> usize {
        self.pdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pdf.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Importance weight `1[x in Omega] / (n pdf(x))` of every sample.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.pdf
            .iter()
            .zip(&self.inside)
            .map(|(&p, &inside)| if inside { 1.0 / (n * p) } else { 0.0 })
            .collect()
    }
}

/// Exact density of the sampling mixture at `x`: `n_uniform / n` of the box
/// density plus `n_gauss / n` of the equal-weight Gaussian mixture over `centers`.
pub fn mixture_pdf(domain: &Domain, centers: &[f64], sigma: f64, n_uniform: usize, n_gauss: usize, x: &[f64]) -> f64 {
    let d = domain.dim();
    let n = (n_uniform + n_gauss) as f64;
    let mut pdf = 0.0;
    if n_uniform > 0 && domain.contains(x) {
        pdf += n_uniform as f64 / n / domain.volume();
    }
    if n_gauss > 0 {
        let b = centers.len() / d;
        let norm = (2.0 * PI * sigma * sigma).powf(-(d as f64) / 2.0);
        let inv = -0.5 / (sigma * sigma);
        let mut acc = 0.0;
        for c in centers.chunks_exact(d) {
            let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            acc += (inv * r2).exp();
        }
        pdf += n_gauss as f64 / n * norm * acc / b as f64;
    }
    pdf
}

/// Draw `n_uniform` points uniformly in `domain` and `n_gauss` points as a
/// random center of `centers` plus isotropic noise `sigma`. `index` selects an
/// independent draw (the training iteration).
pub fn sample_volume(
    domain: &Domain,
    centers: &PointCloud,
    n_uniform: usize,
    n_gauss: usize,
    sigma: f64,
    seed: u64,
    index: u64,
) -> Result<VolumeBatch> {
    let d = domain.dim();
    if n_gauss > 0 && centers.is_empty() {
        return Err(Error::invalid("Gaussian samples need a nonempty center set"));
    }
    if n_gauss > 0 && centers.dim() != d {
        return Err(Error::invalid("center dimension differs from the domain"));
    }
    if n_gauss > 0 && !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    let mut r = rng::stream(seed, "volume-sampler", index);
    let n = n_uniform + n_gauss;
    let mut points = Vec::with_capacity(n * d);
    let mut kinds = Vec::with_capacity(n);
    for _ in 0..n_uniform {
        for a in 0..d {
            points.push(r.random_range(domain.lower[a]..domain.upper[a]));
        }
        kinds.push(SampleKind::Uniform);
    }
    for _ in 0..n_gauss {
        let c = centers.point(r.random_range(0..centers.len()));
        for &ca in c {
            let z: f64 = StandardNormal.sample(&mut r);
            points.push(ca + sigma * z);
        }
        kinds.push(SampleKind::Gaussian);
    }
    let flat = centers.as_flat();
    let pdf = points.chunks_exact(d).map(|x| mixture_pdf(domain, flat, sigma, n_uniform, n_gauss, x)).collect();
    let inside = points.chunks_exact(d).map(|x| domain.contains(x)).collect();
    Ok(VolumeBatch { dim: d, points, pdf, kinds, inside })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn pow_p(x: f64, p: u32) -> (f64, f64) {
    // (|x|^p, d|x|^p/dx)
    match p {
        1 => (x.abs(), sign(x)),
        2 => (x * x, 2.0 * x),
        _ => {
            let a = x.abs();
            (a.powi(p as i32), p as f64 * a.powi(p as i32 - 1) * sign(x))
        }
    }
}

/// Mean of `|u|^p` over boundary samples.
pub fn boundary_loss(values: &[f64], p: u32) -> f64 {
    assert!(!values.is_empty(), "boundary batch is empty");
    values.iter().map(|&u| pow_p(u, p).0).sum::<f64>() / values.len() as f64
}

pub fn boundary_loss_adjoint(values: &[f64], p: u32, weight: f64, adj: &mut Adjoints) -> f64 {
    let n = values.len() as f64;
    let mut total = 0.0;
    for (a, &u) in adj.d_value.iter_mut().zip(values) {
        let (v, dv) = pow_p(u, p);
        total += v;
        *a += weight * dv / n;
    }
    total / n
}

/// Integrand of a volume term: value and its derivatives in `u` and `|grad u|`.
type Integrand<'a> = &'a dyn Fn(f64, f64) -> (f64, f64, f64);

fn volume_term(evals: &BatchEval, batch: &VolumeBatch, f: Integrand, acc: Option<(f64, &mut Adjoints)>) -> f64 {
    assert_eq!(evals.len(), batch.len(), "evaluations and samples differ in length");
    let d = evals.dim;
    let w = batch.weights();
    let mut total = 0.0;
    match acc {
        None => {
            for i in 0..evals.len() {
                if w[i] != 0.0 {
                    total += w[i] * f(evals.values[i], evals.grad_norm(i)).0;
                }
            }
        }
        Some((weight, adj)) => {
            for i in 0..evals.len() {
                if w[i] == 0.0 {
                    continue;
                }
                let g = evals.grad_norm(i);
                let (v, du, dg) = f(evals.values[i], g);
                total += w[i] * v;
                adj.d_value[i] += weight * w[i] * du;
                if g > 0.0 && dg != 0.0 {
                    let s = weight * w[i] * dg / g;
                    for k in 0..d {
                        adj.d_grad[i * d + k] += s * evals.grads[i * d + k];
                    }
                }
            }
        }
    }
    total
}

fn eikonal_integrand(p: u32) -> impl Fn(f64, f64) -> (f64, f64, f64) {
    move |_u, g| {
        let (v, dv) = pow_p(g - 1.0, p);
        (v, 0.0, dv)
    }
}

/// Lower clamp on the heat-term exponent; below it the term is exactly zero.
pub const HEAT_EXPONENT_FLOOR: f64 = -700.0;

fn heat_integrand(lambda: f64) -> impl Fn(f64, f64) -> (f64, f64, f64) {
    move |u, g| {
        let e = (-2.0 * lambda * u.abs()).max(HEAT_EXPONENT_FLOOR).exp();
        let v = 0.5 * e * (g * g + 1.0);
        (v, -2.0 * lambda * sign(u) * v, e * g)
    }
}

fn area_integrand(lambda: f64) -> impl Fn(f64, f64) -> (f64, f64, f64) {
    move |u, g| {
        let e = (-lambda * u.abs()).max(HEAT_EXPONENT_FLOOR).exp();
        (e * g, -lambda * sign(u) * e * g, e)
    }
}

fn phase_integrand(eps: f64, clamp: f64) -> impl Fn(f64, f64) -> (f64, f64, f64) {
    move |o, g| {
        let c = o.clamp(-clamp, clamp);
        let dc = if o.abs() < clamp { 1.0 } else { 0.0 };
        (eps * g * g + phase_potential(c), dc * (2.0 * c - 2.0 * sign(c)), 2.0 * eps * g)
    }
}

/// Estimate of `int_Omega | |grad u| - 1 |^p dx`.
pub fn eikonal_loss(evals: &BatchEval, batch: &VolumeBatch, p: u32) -> f64 {
    volume_term(evals, batch, &eikonal_integrand(p), None)
}

pub fn eikonal_loss_adjoint(evals: &BatchEval, batch: &VolumeBatch, p: u32, weight: f64, adj: &mut Adjoints) -> f64 {
    volume_term(evals, batch, &eikonal_integrand(p), Some((weight, adj)))
}

/// Estimate of `1/2 int_Omega e^(-2 lambda |u|) (|grad u|^2 + 1) dx`.
pub fn heat_loss(evals: &BatchEval, batch: &VolumeBatch, lambda: f64) -> f64 {
    volume_term(evals, batch, &heat_integrand(lambda), None)
}

pub fn heat_loss_adjoint(evals: &BatchEval, batch: &VolumeBatch, lambda: f64, weight: f64, adj: &mut Adjoints) -> f64 {
    volume_term(evals, batch, &heat_integrand(lambda), Some((weight, adj)))
}

/// Estimate of the coarea surface-area proxy `int_Omega e^(-lambda |u|) |grad u| dx`.
pub fn area_loss(evals: &BatchEval, batch: &VolumeBatch, lambda: f64) -> f64 {
    volume_term(evals, batch, &area_integrand(lambda), None)
}

pub fn area_loss_adjoint(evals: &BatchEval, batch: &VolumeBatch, lambda: f64, weight: f64, adj: &mut Adjoints) -> f64 {
    volume_term(evals, batch, &area_integrand(lambda), Some((weight, adj)))
}

/// Occupancy-style regulariser: estimate of `int eps |grad o|^2 + W(o)` with
/// the field output read as an occupancy clamped to `[-clamp, clamp]`.
pub fn phase_loss(evals: &BatchEval, batch: &VolumeBatch, eps: f64, clamp: f64) -> f64 {
    volume_term(evals, batch, &phase_integrand(eps, clamp), None)
}

pub fn phase_loss_adjoint(evals: &BatchEval, batch: &VolumeBatch, eps: f64, clamp: f64, weight: f64, adj: &mut Adjoints) -> f64 {
    volume_term(evals, batch, &phase_integrand(eps, clamp), Some((weight, adj)))
}

/// Unsigned-distance regression: mean of `| |u(x)| - dist(x) |`.
///
/// This form is a reconstruction, not a published definition; it is kept out
/// of the headline metrics.
pub fn sal_loss(values: &[f64], distances: &[f64]) -> f64 {
    assert_eq!(values.len(), distances.len());
    values.iter().zip(distances).map(|(u, d)| (u.abs() - d).abs()).sum::<f64>() / values.len() as f64
}

pub fn sal_loss_adjoint(values: &[f64], distances: &[f64], weight: f64, adj: &mut Adjoints) -> f64 {
    let n = values.len() as f64;
    for (a, (u, d)) in adj.d_value.iter_mut().zip(values.iter().zip(distances)) {
        *a += weight * sign(u.abs() - d) * sign(*u) / n;
    }
    sal_loss(values, distances)
}

/// Brute-force distance from each point to its nearest cloud point.
pub fn cloud_distances(points: &[f64], cloud: &PointCloud) -> Vec<f64> {
    let d = cloud.dim();
    points
        .chunks_exact(d)
        .map(|x| {
            cloud
                .iter()
                .map(|c| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

/// Double-well potential `W(o) = o^2 - 2|o| + 1`.
pub fn phase_potential(o: f64) -> f64 {
    o * o - 2.0 * o.abs() + 1.0
}

/// Occupancy to signed distance: `-sqrt(eps) ln(1 - |o|) sign(o)` with `|o|`
/// clamped to `clamp`.
pub fn phase_log_transform(o: f64, eps: f64, clamp: f64) -> f64 {
    let a = o.abs().min(clamp);
    -eps.sqrt() * (1.0 - a).ln() * sign(o)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseParams {
    pub eps: f64,
    pub clamp: f64,
}

impl Default for PhaseParams {
    fn default() -> Self {
        PhaseParams { eps: 0.01, clamp: 0.99 }
    }
}

/// Loss weights, absorption and exponent. Every scalar is a schedule over
/// normalised iteration; constants are single-knot schedules.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub w_boundary: Schedule,
    pub w_eikonal: Schedule,
    pub w_heat: Schedule,
    pub w_area: Schedule,
    pub w_sal: Schedule,
    pub w_phase: Schedule,
    pub lambda: Schedule,
    pub p: u32,
    pub phase: PhaseParams,
}

impl LossConfig {
    /// Constant weights, no optional terms.
    pub fn constant(w_boundary: f64, w_eikonal: f64, w_heat: f64, lambda: f64) -> Self {
        LossConfig {
            w_boundary: Schedule::constant(w_boundary),
            w_eikonal: Schedule::constant(w_eikonal),
            w_heat: Schedule::constant(w_heat),
            w_area: Schedule::constant(0.0),
            w_sal: Schedule::constant(0.0),
            w_phase: Schedule::constant(0.0),
            lambda: Schedule::constant(lambda),
            p: 1,
            phase: PhaseParams::default(),
        }
    }

    /// 2D defaults: constant lambda; over the last fifth of training the heat
    /// weight falls to a fifth and the eikonal weight rises tenfold.
    pub fn default_2d() -> Self {
        let mut c = LossConfig::constant(1000.0, 0.1, 1.0, 20.0);
        c.w_heat = Schedule::ramp(0.8, 1.0, 1.0, 0.2).unwrap();
        c.w_eikonal = Schedule::ramp(0.8, 0.1, 1.0, 1.0).unwrap();
        c
    }

    /// 3D defaults: lambda rises linearly from 5 to 30 over the first 80%.
    pub fn default_3d() -> Self {
        let mut c = LossConfig::constant(1000.0, 0.1, 1.0, 5.0);
        c.lambda = Schedule::ramp(0.0, 5.0, 0.8, 30.0).unwrap();
        c
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.min_value() > 0.0) {
            return Err(Error::InvalidConfig("lambda must stay positive".into()));
        }
        for (name, s) in self.weights_named() {
            if s.min_value() < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be nonnegative")));
            }
        }
        if self.p == 0 {
            return Err(Error::InvalidConfig("p must be at least 1".into()));
        }
        if !(self.phase.eps > 0.0) || !(self.phase.clamp > 0.0 && self.phase.clamp < 1.0) {
            return Err(Error::InvalidConfig("phase.eps must be positive and phase.clamp in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn weights_named(&self) -> [(&'static str, &Schedule); 6] {
        [
            ("w_b", &self.w_boundary),
            ("w_e", &self.w_eikonal),
            ("w_h", &self.w_heat),
            ("w_area", &self.w_area),
            ("w_sal", &self.w_sal),
            ("w_phase", &self.w_phase),
        ]
    }

    /// Weights and absorption in effect at normalised time `t`.
    pub fn at(&self, t: f64) -> Effective {
        Effective {
            w_boundary: self.w_boundary.eval(t),
            w_eikonal: self.w_eikonal.eval(t),
            w_heat: self.w_heat.eval(t),
            w_area: self.w_area.eval(t),
            w_sal: self.w_sal.eval(t),
            w_phase: self.w_phase.eval(t),
            lambda: self.lambda.eval(t),
        }
    }
}

/// Scheduled quantities at one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Effective {
    pub w_boundary: f64,
    pub w_eikonal: f64,
    pub w_heat: f64,
    pub w_area: f64,
    pub w_sal: f64,
    pub w_phase: f64,
    pub lambda: f64,
}

/// Unweighted term values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TermValues {
    pub boundary: f64,
    pub eikonal: f64,
    pub heat: f64,
    pub area: f64,
    pub sal: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub terms: TermValues,
    pub total: f64,
    pub effective: Effective,
}

/// Combine term values with the weights scheduled at `iter / total_iters`.
pub fn total_loss(terms: &TermValues, config: &LossConfig, iter: usize, total_iters: usize) -> LossBreakdown {
    let t = if total_iters == 0 { 0.0 } else { (iter as f64 / total_iters as f64).clamp(0.0, 1.0) };
    let e = config.at(t);
    let total = e.w_boundary * terms.boundary
        + e.w_eikonal * terms.eikonal
        + e.w_heat * terms.heat
        + e.w_area * terms.area
        + e.w_sal * terms.sal
        + e.w_phase * terms.phase;
    LossBreakdown { terms: *terms, total, effective: e }
}
