use rayon::prelude::*;

use crate::geometry::{GridSpec, ScalarGrid};
use crate::{Error, Result};

/// Solver controls for [`fd_screened_poisson_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    /// Target for the stencil residual divided by the diagonal, in value units.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions { tolerance: 1e-10, max_iterations: 200_000 }
    }
}

/// Finite-difference solve of `lap h - lambda^2 h = 0` on the nodes of `spec`.
///
/// Nodes with `mask[i]` hold the Dirichlet value `values[i]`; the remaining
/// nodes on the outer box faces hold 0. Interior nodes use the 5-point (2D)
/// or 7-point (3D) stencil; the system is solved by conjugate gradients.
pub fn fd_screened_poisson(spec: &GridSpec, mask: &[bool], values: &[f64], lambda: f64) -> Result<ScalarGrid> {
    fd_screened_poisson_with(spec, mask, values, lambda, FdOptions::default())
}

pub fn fd_screened_poisson_with(
    spec: &GridSpec,
    mask: &[bool],
    values: &[f64],
    lambda: f64,
    opts: FdOptions,
) -> Result<ScalarGrid> {
    let n = spec.len();
    if mask.len() != n || values.len() != n {
        return Err(Error::invalid("mask and values must match the grid size"));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::invalid("boundary mask is empty"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda must be nonnegative"));
    }
    let d = spec.dim();
    let strides = spec.strides();
    let w: Vec<f64> = (0..d).map(|a| 1.0 / (spec.spacing(a) * spec.spacing(a))).collect();
    let diag = 2.0 * w.iter().sum::<f64>() + lambda * lambda;

    let free: Vec<bool> = (0..n)
        .map(|i| {
            if mask[i] {
                return false;
            }
            let idx = spec.unflatten(i);
            idx.iter().zip(&spec.res).all(|(&k, &r)| k > 0 && k + 1 < r)
        })
        .collect();
    let mut h: Vec<f64> = (0..n).map(|i| if mask[i] { values[i] } else { 0.0 }).collect();

    // Right-hand side: fixed neighbors of free nodes.
    let b: Vec<f64> = (0..n)
        .map(|i| {
            if !free[i] {
                return 0.0;
            }
            let mut acc = 0.0;
            for a in 0..d {
                for j in [i - strides[a], i + strides[a]] {
                    if !free[j] {
                        acc += w[a] * h[j];
                    }
                }
            }
            acc
        })
        .collect();

    let apply = |x: &[f64], out: &mut [f64]| {
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            if !free[i] {
                *o = 0.0;
                return;
            }
            let mut acc = diag * x[i];
            for a in 0..d {
                let (lo, hi) = (i - strides[a], i + strides[a]);
                if free[lo] {
                    acc -= w[a] * x[lo];
                }
                if free[hi] {
                    acc -= w[a] * x[hi];
                }
            }
            *o = acc;
        });
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let max_abs = |a: &[f64]| a.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    // Unknowns start at zero; fixed entries of x stay zero throughout.
    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    while max_abs(&r) / diag > opts.tolerance {
        if iterations >= opts.max_iterations {
            return Err(Error::NumericalFailure {
                message: format!("conjugate gradients did not converge in {iterations} iterations"),
                residual: Some(max_abs(&r) / diag),
            });
        }
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        iterations += 1;
        // Guard against drift in the recursive residual.
        if iterations % 500 == 0 {
            apply(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            rr = dot(&r, &r);
        }
    }
    // Final check on the true residual.
    apply(&x, &mut ap);
    let true_residual = (0..n).map(|i| (b[i] - ap[i]).abs()).fold(0.0, f64::max) / diag;
    if true_residual > 1e-8 {
        return Err(Error::NumericalFailure {
            message: "finite-difference residual above 1e-8".into(),
            residual: Some(true_residual),
        });
    }
    for i in 0..n {
        if free[i] {
            h[i] = x[i];
        }
    }
    ScalarGrid::new(spec.clone(), h)
}

/// Radial finite-difference solve of `h'' + (2/r) h' - lambda^2 h = 0` on
/// `[eps, r_max]` with `h(eps) = h0` and the outgoing condition
/// `h' = -(lambda + 1/r) h` at `r_max`. Returns `(r, h)` at `n` nodes.
pub fn fd_radial_3d(eps: f64, lambda: f64, h0: f64, r_max: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(eps > 0.0 && r_max > eps && n >= 3) {
        return Err(Error::invalid("radial solve needs 0 < eps < r_max and at least 3 nodes"));
    }
    let dr = (r_max - eps) / (n - 1) as f64;
    let r: Vec<f64> = (0..n).map(|i| eps + dr * i as f64).collect();
    // Tridiagonal rows a h_{i-1} + b h_i + c h_{i+1} = rhs.
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    b[0] = 1.0;
    rhs[0] = h0;
    for i in 1..n {
        let ri = r[i];
        a[i] = 1.0 / (dr * dr) - 1.0 / (ri * dr);
        b[i] = -2.0 / (dr * dr) - lambda * lambda;
        c[i] = 1.0 / (dr * dr) + 1.0 / (ri * dr);
    }
    // Ghost node from the Robin condition: h_{n} = h_{n-2} - 2 dr (lambda + 1/R) h_{n-1}.
    let last = n - 1;
    a[last] += c[last];
    b[last] -= c[last] * 2.0 * dr * (lambda + 1.0 / r[last]);
    c[last] = 0.0;
    // Thomas algorithm.
    for i in 1..n {
        let m = a[i] / b[i - 1];
        b[i] -= m * c[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    let mut h = vec![0.0; n];
    h[last] = rhs[last] / b[last];
    for i in (0..last).rev() {
        h[i] = (rhs[i] - c[i] * h[i + 1]) / b[i];
    }
    Ok((r, h))
}
