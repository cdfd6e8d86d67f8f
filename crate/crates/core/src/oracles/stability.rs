use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::{Error, Result};

/// Linearised gradient flow acting on one Fourier mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flow {
    /// Heat-loss flow `h_t = lap h - lambda^2 h`.
    Heat { lambda: f64 },
    /// Eikonal flow with effective diffusivity `kappa`; `kappa < 0` is backward diffusion.
    Eikonal { kappa: f64 },
}

impl Flow {
    /// Exact amplitude factor of mode `omega` over one step `dt`.
    pub fn factor(&self, omega: f64, dt: f64) -> f64 {
        match *self {
            Flow::Heat { lambda } => (-(omega * omega + lambda * lambda) * dt).exp(),
            Flow::Eikonal { kappa } => (-kappa * omega * omega * dt).exp(),
        }
    }
}

/// Amplitude trajectories, one per mode, each starting at 1 and holding
/// `steps + 1` values.
pub fn stability_sim(modes: &[f64], flow: Flow, dt: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    Ok(modes
        .iter()
        .map(|&omega| {
            let f = flow.factor(omega, dt);
            let mut a = 1.0;
            let mut traj = Vec::with_capacity(steps + 1);
            traj.push(a);
            for _ in 0..steps {
                a *= f;
                traj.push(a);
            }
            traj
        })
        .collect())
}

/// Explicit-Euler limit for [`grid_heat_euler`]: `dt < 2 / (4/dx^2 + lambda^2)`.
pub fn euler_stability_limit(dx: f64, lambda: f64) -> f64 {
    2.0 / (4.0 / (dx * dx) + lambda * lambda)
}

/// Explicit Euler on a periodic 1D grid of `n` cells over `[0, 1)` for
/// `h_t = h_xx - lambda^2 h`, from the given initial state. Returns the
/// max-norm after every step (initial value first).
pub fn grid_heat_euler(initial: &[f64], lambda: f64, dt: f64, steps: usize) -> Result<Vec<f64>> {
    let n = initial.len();
    if n < 3 {
        return Err(Error::invalid("grid needs at least 3 cells"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    let dx = 1.0 / n as f64;
    let mut h = initial.to_vec();
    let mut next = vec![0.0; n];
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut out = vec![norm(&h)];
    for _ in 0..steps {
        for i in 0..n {
            let lap = (h[(i + 1) % n] - 2.0 * h[i] + h[(i + n - 1) % n]) / (dx * dx);
            next[i] = h[i] + dt * (lap - lambda * lambda * h[i]);
        }
        std::mem::swap(&mut h, &mut next);
        out.push(norm(&h));
    }
    Ok(out)
}

/// Initial state mixing the constant mode, a low mode and the grid Nyquist mode.
pub fn mixed_modes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = i as f64 / n as f64;
            1.0 + 0.5 * (2.0 * PI * x).sin() + 1e-3 * if i % 2 == 0 { 1.0 } else { -1.0 }
        })
        .collect()
}

/// `mode,step,amplitude` rows.
pub fn trajectories_csv(modes: &[f64], traj: &[Vec<f64>]) -> String {
    let mut s = String::from("omega,step,amplitude\n");
    for (w, t) in modes.iter().zip(traj) {
        for (k, a) in t.iter().enumerate() {
            let _ = writeln!(s, "{w:.9e},{k},{a:.9e}");
        }
    }
    s
}
