//! Self-checks that exercise the oracles and the field's derivatives,
//! reported as named pass/fail rows.

use std::fmt::Write as _;

use rand::Rng;

use crate::field::{init_random, max_fd_relative_error, Activation, Adjoints, Architecture};
use crate::oracles::experiments::{
    disk_fd_comparison, exterior_queries, radial_fd_comparison, random_sources, segment_varadhan_comparison,
};
use crate::oracles::{
    bessel_k0, check_bounds, check_bounds_with, convergence_sweep, euler_stability_limit, grid_heat_euler, mixed_modes, solve_multipoint,
    stability_sim, Flow,
};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    ClosedForms,
    Bounds,
    Convergence,
    Stability,
    Autodiff,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::ClosedForms, Suite::Bounds, Suite::Convergence, Suite::Stability, Suite::Autodiff];

    pub fn name(self) -> &'static str {
        match self {
            Suite::ClosedForms => "closed_forms",
            Suite::Bounds => "bounds",
            Suite::Convergence => "convergence",
            Suite::Stability => "stability",
            Suite::Autodiff => "autodiff",
        }
    }

    /// One suite, or every suite for `all`.
    pub fn parse(s: &str) -> Result<Vec<Suite>> {
        if s == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .map(|x| vec![x])
            .ok_or_else(|| Error::invalid(format!("unknown suite '{s}'; expected closed_forms, bounds, convergence, stability, autodiff or all")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `suite  check  PASS|FAIL  detail` rows.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{:<13} {:<34} {:<4}  {}", self.suite.name(), c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Random multi-source configurations for the bound check.
    pub bound_configs: usize,
    pub queries_per_config: usize,
    /// Random networks for the derivative check.
    pub autodiff_nets: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { seed: 0, bound_configs: 100, queries_per_config: 100, autodiff_nets: 20 }
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.to_string(), passed, detail }
}

pub fn run_suite(suite: Suite, opts: &ValidateOptions) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::ClosedForms => closed_forms()?,
        Suite::Bounds => bounds(opts)?,
        Suite::Convergence => convergence(opts)?,
        Suite::Stability => stability()?,
        Suite::Autodiff => autodiff(opts)?,
    };
    Ok(SuiteReport { suite, checks })
}

fn closed_forms() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let table = [
        (1.0, 0.421_024_438_240_708_333_f64),
        (5.0, 3.691_098_334_042_594_3e-3),
        (10.0, 1.778_006_231_616_765_2e-5),
    ];
    let worst = table.iter().map(|&(x, want)| Ok(((bessel_k0(x)? - want) / want).abs())).collect::<Result<Vec<f64>>>()?;
    let worst = worst.into_iter().fold(0.0, f64::max);
    out.push(check("k0_reference_values", worst < 1e-8, format!("max relative error {worst:.3e}")));

    let radial = radial_fd_comparison(0.1, 10.0, 10_000)?;
    out.push(check("radial_3d_fd_vs_closed_form", radial < 5e-3, format!("max relative error {radial:.3e} (limit 5e-3)")));

    let coarse = disk_fd_comparison(5.0, 0.2, 2.0, 0.04)?;
    let fine = disk_fd_comparison(5.0, 0.2, 2.0, 0.02)?;
    out.push(check(
        "disk_2d_fd_vs_k0",
        fine.max_relative < 0.02,
        format!("max relative error {:.3e} at dx 0.02 (limit 2e-2)", fine.max_relative),
    ));
    let ratio = coarse.max_absolute / fine.max_absolute;
    out.push(check("fd_second_order_convergence", (3.0..=5.0).contains(&ratio), format!("error ratio {ratio:.3} under halving (range [3, 5])")));

    let seg = segment_varadhan_comparison(20.0, 0.01)?;
    out.push(check(
        "segment_distance_recovery",
        seg.violations == 0 && seg.checked > 0,
        format!("{} of {} nodes outside the bound", seg.violations, seg.checked),
    ));
    Ok(out)
}

fn bounds(opts: &ValidateOptions) -> Result<Vec<Check>> {
    let eps = 0.01;
    let (mut systems, mut failed_systems, mut rows, mut failed_rows) = (0, 0, 0, 0);
    for k in 0..opts.bound_configs as u64 {
        let n = 1 + (k as usize % 20);
        let centers = random_sources(opts.seed, k, n, eps);
        let queries = exterior_queries(opts.seed, k, &centers, opts.queries_per_config, 2.0 * eps + 1e-9);
        for lambda in [20.0, 40.0, 80.0] {
            let s = solve_multipoint(&centers, eps, lambda)?;
            let r = check_bounds(&s, &queries)?;
            systems += 1;
            rows += r.rows.len();
            failed_rows += r.rows.len() - r.passed();
            failed_systems += (!r.all_pass()) as usize;
        }
    }
    let mut out = vec![check(
        "random_configurations",
        failed_systems == 0,
        format!("{} of {systems} systems pass; {failed_rows} of {rows} queries fail", systems - failed_systems),
    )];
    let centers = random_sources(opts.seed, u64::MAX, 5, eps);
    let s = solve_multipoint(&centers, eps, 30.0)?;
    let q = exterior_queries(opts.seed, u64::MAX, &centers, 1, 0.5);
    let r = check_bounds_with(&s, &q, |_| 0.0)?;
    out.push(check("deliberate_violation_flagged", !r.all_pass(), "estimate forced to 0 far from every source".into()));
    Ok(out)
}

fn convergence(opts: &ValidateOptions) -> Result<Vec<Check>> {
    let lambdas = [20.0, 40.0, 80.0];
    let (mut lo, mut hi, mut count, mut bad) = (f64::INFINITY, f64::NEG_INFINITY, 0, 0);
    for k in 0..10u64 {
        let centers = random_sources(opts.seed.wrapping_add(1), k, 1 + k as usize, 0.01);
        let q = exterior_queries(opts.seed.wrapping_add(1), k, &centers, 20, 0.1);
        let e = convergence_sweep(&centers, 0.01, &lambdas, &q)?;
        for step in 0..lambdas.len() - 1 {
            for i in 0..q.len() {
                let ratio = e[step + 1][i] / e[step][i];
                lo = lo.min(ratio);
                hi = hi.max(ratio);
                count += 1;
                bad += !(0.4..=0.6).contains(&ratio) as usize;
            }
        }
    }
    Ok(vec![check(
        "error_halves_when_lambda_doubles",
        bad == 0,
        format!("{count} ratios in [{lo:.4}, {hi:.4}] (range [0.4, 0.6])"),
    )])
}

fn stability() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let modes = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
    let dt = 0.01;
    let mut worst: f64 = 0.0;
    for lambda in [0.0, 1.0, 5.0, 10.0, 20.0] {
        let traj = stability_sim(&modes, Flow::Heat { lambda }, dt, 50)?;
        for (w, t) in modes.iter().zip(&traj) {
            let want = (-(w * w + lambda * lambda) * dt).exp();
            for pair in t.windows(2) {
                worst = worst.max((pair[1] / pair[0] - want).abs());
            }
        }
    }
    out.push(check("heat_mode_factors_exact", worst <= 1e-12, format!("max deviation {worst:.3e}")));

    let n = 64;
    let dx = 1.0 / n as f64;
    let lambda = 5.0;
    let initial = mixed_modes(n);
    let limit = euler_stability_limit(dx, lambda);
    let below = grid_heat_euler(&initial, lambda, 0.9 * limit, 400)?;
    let above = grid_heat_euler(&initial, lambda, 1.1 * limit, 400)?;
    let decays = below.last().unwrap() < &below[0];
    let grows = above.last().unwrap() > &below[0];
    out.push(check("euler_decays_below_limit", decays, format!("max-norm {:.3e} -> {:.3e} at 0.9 x limit", below[0], below.last().unwrap())));
    out.push(check("euler_grows_above_limit", grows, format!("max-norm {:.3e} -> {:.3e} at 1.1 x limit", above[0], above.last().unwrap())));

    let traj = stability_sim(&modes, Flow::Eikonal { kappa: -0.1 }, dt, 50)?;
    let monotone = traj.iter().all(|t| t.windows(2).all(|w| w[1] > w[0]));
    out.push(check("backward_eikonal_grows", monotone, "kappa = -0.1, every mode strictly increasing".into()));
    Ok(out)
}

fn autodiff(opts: &ValidateOptions) -> Result<Vec<Check>> {
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for k in 0..opts.autodiff_nets as u64 {
        let mut r = rng::stream(opts.seed, "autodiff-net", k);
        let dim = if k % 2 == 0 { 2 } else { 3 };
        let layers = r.random_range(3..=5);
        let width = r.random_range(4..=64);
        let arch = Architecture::new(dim, width, layers, Activation::Softplus { beta: 100.0 })?;
        let mut f = init_random(&arch, opts.seed.wrapping_add(k));
        // Nonzero biases so kinks are not all at the origin.
        let mut off = 0;
        for (n_in, n_out) in arch.layer_shapes() {
            off += n_in * n_out;
            for b in &mut f.params[off..off + n_out] {
                *b = r.random_range(-0.5..0.5);
            }
            off += n_out;
        }
        let n = 6;
        let pts: Vec<f64> = (0..n * dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut adj = Adjoints::zeros(n, dim);
        adj.d_value.iter_mut().chain(adj.d_grad.iter_mut()).for_each(|a| *a = r.random_range(-1.0..1.0));
        let e = max_fd_relative_error(&f, &pts, &adj);
        worst = worst.max(e);
        if e >= 1e-4 {
            detail.push(format!("net {k} (d={dim}, {layers}x{width}): {e:.3e}"));
        }
    }
    let msg = if detail.is_empty() {
        format!("{} nets, max relative error {worst:.3e} (limit 1e-4)", opts.autodiff_nets)
    } else {
        detail.join("; ")
    };
    Ok(vec![check("param_gradient_vs_central_differences", worst < 1e-4, msg)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_suites() {
        assert_eq!(Suite::parse("all").unwrap().len(), 5);
        assert_eq!(Suite::parse("bounds").unwrap(), vec![Suite::Bounds]);
        assert!(Suite::parse("nope").is_err());
    }

    #[test]
    fn quick_suites_pass() {
        let opts = ValidateOptions { bound_configs: 5, queries_per_config: 20, autodiff_nets: 2, ..Default::default() };
        for s in [Suite::Bounds, Suite::Convergence, Suite::Stability, Suite::Autodiff] {
            let r = run_suite(s, &opts).unwrap();
            assert!(r.passed(), "{}", r.table());
        }
    }
}
