//! One-dimensional demonstration: two boundary points at `x = -0.5, 0.5`,
//! true field `|x| - 0.5`, and an adversarial start that satisfies the
//! eikonal equation almost everywhere but is not a distance function.

use super::{train_from, Hooks, InitKind, TrainConfig};
use crate::field::{adam_step, fit_to_function, init_random, AdamState, Adjoints, NeuralField, PrefitConfig};
use crate::geometry::PointCloud;
use crate::losses::{self, Domain, LossConfig, Schedule};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoMode {
    /// Boundary and eikonal terms only.
    EikonalOnly,
    /// Boundary, eikonal and heat terms.
    WithHeat,
}

impl DemoMode {
    pub fn name(self) -> &'static str {
        match self {
            DemoMode::EikonalOnly => "eikonal_only",
            DemoMode::WithHeat => "with_heat",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "eikonal_only" | "eikonal" => Some(DemoMode::EikonalOnly),
            "with_heat" | "heat" => Some(DemoMode::WithHeat),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub width: usize,
    pub layers: usize,
    pub iterations: usize,
    pub n_uniform: usize,
    pub n_gauss: usize,
    pub sigma: f64,
    pub lr: Schedule,
    pub lambda: Schedule,
    pub w_boundary: f64,
    pub w_eikonal: Schedule,
    pub w_heat: f64,
    pub prefit: PrefitConfig,
    /// Iterations between probe-error samples.
    pub eval_interval: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            width: 32,
            layers: 2,
            iterations: 3000,
            n_uniform: 128,
            n_gauss: 128,
            sigma: 0.3,
            lr: Schedule::ramp(0.0, 1e-3, 1.0, 1e-4).unwrap(),
            // Low absorption until the interior has lifted, then sharpen.
            lambda: Schedule::new(vec![(0.0, 3.0), (0.3, 3.0), (0.5, 20.0)]).unwrap(),
            w_boundary: 100.0,
            w_eikonal: Schedule::new(vec![(0.0, 0.01), (0.3, 0.01), (0.5, 1.0)]).unwrap(),
            w_heat: 1.0,
            prefit: PrefitConfig { samples: 1000, steps: 800, lr: 1e-3, extent: 1.0 },
            eval_interval: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoResult {
    pub mode: DemoMode,
    pub field: NeuralField,
    /// `(iteration, max probe error)`; iteration 0 is the initial field.
    pub error_curve: Vec<(usize, f64)>,
    pub final_error: f64,
}

impl DemoResult {
    /// `x,u,u_star` on the full 1001-point grid.
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("x,u,u_star\n");
        for x in probe_grid(false) {
            s.push_str(&format!("{},{},{}\n", super::fmt9(x), super::fmt9(self.field.forward(&[x])), super::fmt9(sdf_1d(x))));
        }
        s
    }
}

/// True signed distance of the segment `[-0.5, 0.5]`.
pub fn sdf_1d(x: f64) -> f64 {
    x.abs() - 0.5
}

/// Exact SDF outside; inside, a sawtooth with unit slopes capped at depth
/// 0.225, so `|u'| = 1` away from its kinks.
pub fn adversarial_profile(x: f64) -> f64 {
    if x.abs() >= 0.5 {
        return sdf_1d(x);
    }
    let tri = ((x + 0.5).rem_euclid(0.25) - 0.125).abs();
    -(0.5 - x.abs()).min(0.1 + tri)
}

/// 1001 points on `[-1, 1]`, optionally without the kink neighbourhood `|x| < 0.05`.
pub fn probe_grid(exclude_kink: bool) -> Vec<f64> {
    (0..1001)
        .map(|i| -1.0 + 2.0 * i as f64 / 1000.0)
        .filter(|x| !exclude_kink || x.abs() >= 0.05)
        .collect()
}

/// Max `|u - u*|` on the probe grid.
pub fn probe_error(field: &NeuralField) -> f64 {
    let xs = probe_grid(true);
    field.forward_batch(&xs).iter().zip(&xs).fold(0.0f64, |m, (u, &x)| m.max((u - sdf_1d(x)).abs()))
}

/// Root-mean-square `u - u*` on the probe grid.
pub fn probe_l2(field: &NeuralField) -> f64 {
    let xs = probe_grid(true);
    let s: f64 = field.forward_batch(&xs).iter().zip(&xs).map(|(u, &x)| (u - sdf_1d(x)).powi(2)).sum();
    (s / xs.len() as f64).sqrt()
}

/// The network regressed onto [`adversarial_profile`].
pub fn adversarial_init(cfg: &DemoConfig, seed: u64) -> NeuralField {
    let arch = super::desk_arch(1, cfg.width, cfg.layers);
    let mut field = init_random(&arch, seed);
    fit_to_function(&mut field, |x| adversarial_profile(x[0]), &cfg.prefit, seed);
    field
}

fn train_config(cfg: &DemoConfig, mode: DemoMode, seed: u64) -> TrainConfig {
    let w_heat = if mode == DemoMode::WithHeat { cfg.w_heat } else { 0.0 };
    let mut loss = LossConfig::constant(cfg.w_boundary, 0.0, w_heat, 1.0);
    loss.w_eikonal = cfg.w_eikonal.clone();
    loss.lambda = cfg.lambda.clone();
    TrainConfig {
        iterations: cfg.iterations,
        arch: super::desk_arch(1, cfg.width, cfg.layers),
        init: InitKind::Random,
        prefit: cfg.prefit.clone(),
        boundary_fraction: 1.0,
        boundary_batch: None,
        n_uniform: cfg.n_uniform,
        n_gauss: cfg.n_gauss,
        sigma: cfg.sigma,
        domain: Domain::cube(1, 1.0),
        loss,
        lr: cfg.lr.clone(),
        beta1: 0.9,
        beta2: 0.999,
        adam_eps: 1e-8,
        seed,
        checkpoint_interval: 0,
        checkpoint_path: None,
        log_interval: cfg.iterations,
        eval_interval: cfg.eval_interval,
        halt_at: None,
    }
}

/// Run the demonstration with default settings.
pub fn demo_1d(mode: DemoMode, seed: u64) -> Result<DemoResult> {
    demo_1d_with(mode, seed, &DemoConfig::default(), None)
}

/// Run the demonstration. `init` overrides the adversarial start.
pub fn demo_1d_with(mode: DemoMode, seed: u64, cfg: &DemoConfig, init: Option<NeuralField>) -> Result<DemoResult> {
    let field = init.unwrap_or_else(|| adversarial_init(cfg, seed));
    let config = train_config(cfg, mode, seed);
    let cloud = PointCloud::new(1, vec![-0.5, 0.5])?;
    let mut curve = vec![(0, probe_error(&field))];
    let mut on_eval = |it: usize, f: &NeuralField| curve.push((it, probe_error(f)));
    let hooks = Hooks { on_record: None, on_eval: Some(&mut on_eval) };
    let (field, _) = train_from(&cloud, &config, field, hooks)?;
    let final_error = probe_error(&field);
    Ok(DemoResult { mode, field, error_curve: curve, final_error })
}

/// A one-hidden-layer softplus network equal to `|x| - 0.5` up to the
/// softplus smoothing `2 ln 2 / beta` at the kink.
pub fn exact_sdf_field() -> NeuralField {
    let arch = super::desk_arch(1, 2, 1);
    NeuralField::new(arch, vec![1.0, -1.0, 0.0, 0.0, 1.0, 1.0, -0.5]).expect("parameter count matches")
}

/// Probe RMS error before and after one Adam step on the heat term alone,
/// starting from the adversarial field.
pub fn heat_step(field: &NeuralField, lambda: f64, lr: f64, seed: u64) -> Result<(f64, f64)> {
    let domain = Domain::cube(1, 1.0);
    let centers = PointCloud::new(1, vec![-0.5, 0.5])?;
    let batch = losses::sample_volume(&domain, &centers, 256, 256, 0.3, seed, 0)?;
    let tape = field.record(&batch.points, true);
    let mut adj = Adjoints::zeros(batch.len(), 1);
    losses::heat_loss_adjoint(&tape.eval, &batch, lambda, 1.0, &mut adj);
    let g = field.backward(&tape, &adj);
    let mut after = field.clone();
    let mut adam = AdamState::new(g.len(), lr);
    adam_step(&mut adam, &mut after.params, &g)?;
    Ok((probe_l2(field), probe_l2(&after)))
}

/// Largest change of the probe values after one with-heat training step from `field`.
pub fn one_step_change(field: &NeuralField, cfg: &DemoConfig, seed: u64) -> Result<f64> {
    let mut c = cfg.clone();
    c.iterations = 1;
    c.eval_interval = 0;
    c.width = field.arch.width;
    c.layers = field.arch.layers;
    let r = demo_1d_with(DemoMode::WithHeat, seed, &c, Some(field.clone()))?;
    let xs = probe_grid(false);
    let a = field.forward_batch(&xs);
    let b = r.field.forward_batch(&xs);
    Ok(a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
}
