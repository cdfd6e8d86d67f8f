use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::closed_form::{bessel_k0_scaled, h_point_3d};
use crate::geometry::dist;
use crate::{Error, Result};

/// Superposition of point sources on `eps`-balls around `centers`, with
/// coefficients chosen so `h = e^(-lambda eps)` on every ball surface.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSourceSystem {
    pub dim: usize,
    pub centers: Vec<Vec<f64>>,
    pub eps: f64,
    pub lambda: f64,
    pub coefficients: Vec<f64>,
    /// 1-norm condition estimate of the assembled matrix.
    pub condition: f64,
    /// Infinity norm of `H c - e^(-lambda eps) 1`.
    pub residual: f64,
}

impl PointSourceSystem {
    /// Unit-coefficient kernel of one source at distance `r`.
    fn kernel(&self, r: f64) -> f64 {
        source_kernel(self.dim, r, self.eps, self.lambda)
    }

    /// `h(x) = sum_i c_i k(|x - x_i|)`.
    pub fn heat(&self, x: &[f64]) -> f64 {
        self.centers.iter().zip(&self.coefficients).map(|(c, w)| w * self.kernel(dist(x, c))).sum()
    }

    /// `|u_lambda(x)| = -ln(h(x)) / lambda`.
    pub fn distance_estimate(&self, x: &[f64]) -> f64 {
        -self.heat(x).ln() / self.lambda
    }

    pub fn nearest_distance(&self, x: &[f64]) -> f64 {
        self.centers.iter().map(|c| dist(x, c)).fold(f64::INFINITY, f64::min)
    }
}

/// One source with boundary value `e^(-lambda eps)` on its ball.
fn source_kernel(dim: usize, r: f64, eps: f64, lambda: f64) -> f64 {
    let r = r.max(eps);
    if dim == 3 {
        h_point_3d(r, eps, lambda, (-lambda * eps).exp()).expect("radius clamped to eps")
    } else {
        let ratio = bessel_k0_scaled(lambda * r).expect("positive") / bessel_k0_scaled(lambda * eps).expect("positive");
        (-lambda * eps).exp() * ratio * (-lambda * (r - eps)).exp()
    }
}

/// Assemble and solve `H c = e^(-lambda eps) 1` with `H_ij` the kernel of
/// source `j` evaluated at center `i` (far-field approximation).
pub fn solve_multipoint(centers: &[Vec<f64>], eps: f64, lambda: f64) -> Result<PointSourceSystem> {
    let n = centers.len();
    if n == 0 {
        return Err(Error::invalid("need at least one source"));
    }
    if n > 1000 {
        return Err(Error::invalid("dense solve limited to 1000 sources"));
    }
    let dim = centers[0].len();
    if !(dim == 2 || dim == 3) || centers.iter().any(|c| c.len() != dim) {
        return Err(Error::invalid("sources must all be 2D or all 3D"));
    }
    if !(eps > 0.0) || !(lambda > 0.0) {
        return Err(Error::invalid("eps and lambda must be positive"));
    }
    for i in 0..n {
        for j in 0..i {
            if dist(&centers[i], &centers[j]) <= 2.0 * eps {
                return Err(Error::invalid(format!("sources {j} and {i} are closer than 2 eps")));
            }
        }
    }
    let h = DMatrix::from_fn(n, n, |i, j| source_kernel(dim, dist(&centers[i], &centers[j]), eps, lambda));
    let rhs_value = (-lambda * eps).exp();
    let rhs = DVector::from_element(n, rhs_value);
    let lu = h.clone().lu();
    let inverse = lu
        .try_inverse()
        .ok_or_else(|| Error::numerical("source matrix is singular", None))?;
    let condition = one_norm(&h) * one_norm(&inverse);
    let c = &inverse * &rhs;
    // One step of iterative refinement.
    let c = &c + &inverse * (&rhs - &h * &c);
    let residual = (&h * &c - &rhs).amax();
    if !condition.is_finite() || condition > 1e12 || !(residual < 1e-10 * rhs_value) {
        return Err(Error::NumericalFailure {
            message: format!("source matrix is ill-conditioned (condition estimate {condition:.3e})"),
            residual: Some(residual),
        });
    }
    Ok(PointSourceSystem {
        dim,
        centers: centers.to_vec(),
        eps,
        lambda,
        coefficients: c.iter().copied().collect(),
        condition,
        residual,
    })
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Per-query check of `ln(eps/d) / lambda <= d - |u| <= (ln(eps/d) + ln N) / lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub query: Vec<f64>,
    pub distance: f64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub lambda: f64,
    pub eps: f64,
    pub sources: usize,
    pub tolerance: f64,
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn passed(&self) -> usize {
        self.rows.iter().filter(|r| r.pass).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("query,distance,estimate,gap,lower,upper,pass\n");
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                s,
                "{i},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{}",
                r.distance,
                r.estimate,
                r.distance - r.estimate,
                r.lower,
                r.upper,
                r.pass as u8
            );
        }
        s
    }
}

/// Bound tolerance: the bound is stated for distances to centers while the
/// boundary data sits on the balls, an O(eps) discrepancy.
pub fn bound_tolerance(eps: f64) -> f64 {
    (2.0 * eps).max(1e-9)
}

/// Check the two-sided distance bound at each query using the system's own field.
pub fn check_bounds(system: &PointSourceSystem, queries: &[Vec<f64>]) -> Result<BoundReport> {
    check_bounds_with(system, queries, |x| system.distance_estimate(x))
}

/// As [`check_bounds`] with an arbitrary distance estimate `|u(x)|`.
pub fn check_bounds_with(
    system: &PointSourceSystem,
    queries: &[Vec<f64>],
    estimate: impl Fn(&[f64]) -> f64,
) -> Result<BoundReport> {
    let tol = bound_tolerance(system.eps);
    let ln_n = (system.centers.len() as f64).ln();
    let mut rows = Vec::with_capacity(queries.len());
    for q in queries {
        if q.len() != system.dim {
            return Err(Error::invalid("query dimension differs from the sources"));
        }
        let d = system.nearest_distance(q);
        if d <= 2.0 * system.eps {
            return Err(Error::invalid(format!("query at distance {d} is within 2 eps of a source")));
        }
        let u = estimate(q);
        let lower = (system.eps / d).ln() / system.lambda;
        let upper = lower + ln_n / system.lambda;
        let gap = d - u;
        let pass = gap.is_finite() && gap >= lower - tol && gap <= upper + tol;
        rows.push(BoundRow { query: q.clone(), distance: d, estimate: u, lower, upper, pass });
    }
    Ok(BoundReport { lambda: system.lambda, eps: system.eps, sources: system.centers.len(), tolerance: tol, rows })
}

/// Error `d - |u_lambda|` at each query for each `lambda`, one row per lambda.
pub fn convergence_sweep(centers: &[Vec<f64>], eps: f64, lambdas: &[f64], queries: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    lambdas
        .iter()
        .map(|&lam| {
            let sys = solve_multipoint(centers, eps, lam)?;
            Ok(queries.iter().map(|q| sys.nearest_distance(q) - sys.distance_estimate(q)).collect())
        })
        .collect()
}

/// CSV of a [`convergence_sweep`]: `lambda,query,error`.
pub fn convergence_csv(lambdas: &[f64], errors: &[Vec<f64>]) -> String {
    let mut s = String::from("lambda,query,error\n");
    for (lam, row) in lambdas.iter().zip(errors) {
        for (i, e) in row.iter().enumerate() {
            let _ = writeln!(s, "{lam:.9e},{i},{e:.9e}");
        }
    }
    s
}
