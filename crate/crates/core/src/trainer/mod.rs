//! The optimisation loop: boundary mini-batches, importance-sampled volume
//! batches, scheduled loss weights, Adam, checkpoints and divergence recovery.
//!
//! Every random draw comes from a substream keyed by the iteration number, so
//! a run resumed from a checkpoint replays the uninterrupted run exactly.

mod demo;

pub use demo::{
    adversarial_init, adversarial_profile, demo_1d, demo_1d_with, exact_sdf_field, heat_step, one_step_change, probe_error,
    probe_grid, probe_l2, sdf_1d, DemoConfig, DemoMode, DemoResult,
};

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::index;

use crate::field::{
    adam_step, init_analytic, init_geometric_with, init_random, save_checkpoint, Activation, AdamState, Adjoints,
    Architecture, Checkpoint, NeuralField, PrefitConfig,
};
use crate::geometry::PointCloud;
use crate::losses::{self, Domain, LossBreakdown, LossConfig, Schedule, TermValues};
use crate::{rng, Error, Result};

/// How the network is initialised.
#[derive(Debug, Clone, PartialEq)]
pub enum InitKind {
    /// Analytic sphere initialisation followed by a supervised pre-fit.
    Geometric { radius: f64 },
    /// Analytic sphere initialisation only.
    Analytic { radius: f64 },
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub arch: Architecture,
    pub init: InitKind,
    pub prefit: PrefitConfig,
    /// Fraction of the cloud drawn (without replacement) as each boundary batch.
    pub boundary_fraction: f64,
    /// Overrides `boundary_fraction` with a fixed batch size.
    pub boundary_batch: Option<usize>,
    pub n_uniform: usize,
    pub n_gauss: usize,
    pub sigma: f64,
    pub domain: Domain,
    pub loss: LossConfig,
    /// Learning rate over normalised time.
    pub lr: Schedule,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Iterations between checkpoints; 0 disables them.
    pub checkpoint_interval: usize,
    pub checkpoint_path: Option<PathBuf>,
    /// Iterations between history records; the last iteration is always logged.
    pub log_interval: usize,
    /// Iterations between boundary-fit evaluations on the full cloud.
    pub eval_interval: usize,
    /// Stop after this many completed iterations, leaving schedules untouched.
    pub halt_at: Option<usize>,
}

impl TrainConfig {
    /// Defaults for a `dim`-dimensional cloud.
    pub fn default_for(dim: usize) -> Self {
        let (loss, half, iterations) = match dim {
            3 => (LossConfig::default_3d(), 1.0, 10_000),
            _ => (LossConfig::default_2d(), 1.5, 20_000),
        };
        TrainConfig {
            iterations,
            arch: Architecture::default_for(dim),
            init: InitKind::Geometric { radius: 0.5 },
            prefit: PrefitConfig::default(),
            boundary_fraction: 0.1,
            boundary_batch: None,
            n_uniform: 4096,
            n_gauss: 4096,
            sigma: 0.5,
            domain: Domain::cube(dim, half),
            loss,
            lr: Schedule::constant(1e-4),
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            checkpoint_interval: 0,
            checkpoint_path: None,
            log_interval: 10,
            eval_interval: 0,
            halt_at: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if !(self.boundary_fraction > 0.0 && self.boundary_fraction <= 1.0) {
            return bad("boundary_fraction must lie in (0, 1]");
        }
        if self.boundary_batch == Some(0) {
            return bad("boundary_batch must be positive");
        }
        if self.n_uniform + self.n_gauss == 0 {
            return bad("need at least one volume sample");
        }
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if self.domain.dim() != self.arch.input_dim {
            return bad("domain dimension differs from the network input");
        }
        if !(self.lr.min_value() > 0.0) {
            return bad("learning rate must stay positive");
        }
        if self.log_interval == 0 {
            return bad("log_interval must be positive");
        }
        self.arch.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        self.loss.validate()
    }

    fn boundary_size(&self, n: usize) -> usize {
        self.boundary_batch
            .unwrap_or_else(|| (self.boundary_fraction * n as f64).round() as usize)
            .clamp(1, n)
    }
}

/// One logged iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub iteration: usize,
    pub loss: LossBreakdown,
    pub grad_norm: f64,
    pub lr: f64,
    pub seconds: f64,
}

/// Boundary fit on the full cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub iteration: usize,
    pub mean_abs: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<TrainRecord>,
    pub evals: Vec<EvalRecord>,
    /// Divergence recoveries performed.
    pub recoveries: usize,
}

impl TrainHistory {
    /// CSV of the loss history. Wall-clock time is left out so the file is
    /// reproducible.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "iteration,total,boundary,eikonal,heat,area,sal,phase,lambda,w_b,w_e,w_h,w_area,w_sal,w_phase,grad_norm,lr\n",
        );
        for r in &self.records {
            let (t, e) = (&r.loss.terms, &r.loss.effective);
            let vals = [
                r.loss.total,
                t.boundary,
                t.eikonal,
                t.heat,
                t.area,
                t.sal,
                t.phase,
                e.lambda,
                e.w_boundary,
                e.w_eikonal,
                e.w_heat,
                e.w_area,
                e.w_sal,
                e.w_phase,
                r.grad_norm,
                r.lr,
            ];
            let _ = write!(s, "{}", r.iteration);
            for v in vals {
                let _ = write!(s, ",{}", fmt9(v));
            }
            s.push('\n');
        }
        s
    }
}

/// Nine significant digits.
pub fn fmt9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Callbacks invoked during training.
#[derive(Default)]
pub struct Hooks<'a> {
    /// Receives each logged record.
    pub on_record: Option<&'a mut dyn FnMut(&TrainRecord)>,
    /// Receives the field after every `eval_interval` iterations.
    pub on_eval: Option<&'a mut dyn FnMut(usize, &NeuralField)>,
}

/// Initial network for `config`.
pub fn initial_field(config: &TrainConfig) -> NeuralField {
    match config.init {
        InitKind::Geometric { radius } => init_geometric_with(&config.arch, radius, config.seed, &config.prefit),
        InitKind::Analytic { radius } => init_analytic(&config.arch, radius, config.seed),
        InitKind::Random => init_random(&config.arch, config.seed),
    }
}

/// Train from scratch.
pub fn train(cloud: &PointCloud, config: &TrainConfig) -> Result<(NeuralField, TrainHistory)> {
    train_with(cloud, config, None, Hooks::default())
}

/// Train, optionally resuming from a checkpoint that carries optimizer state.
pub fn train_with(
    cloud: &PointCloud,
    config: &TrainConfig,
    resume: Option<Checkpoint>,
    hooks: Hooks,
) -> Result<(NeuralField, TrainHistory)> {
    config.validate()?;
    match resume {
        Some(Checkpoint { field, optimizer: Some((adam, it)) }) => {
            if field.arch != config.arch {
                return Err(Error::Incompatible("checkpoint architecture differs from the configuration".into()));
            }
            if it > config.iterations {
                return Err(Error::Incompatible(format!(
                    "checkpoint iteration {it} exceeds the configured {} iterations",
                    config.iterations
                )));
            }
            run(cloud, config, field, adam, it, hooks)
        }
        Some(Checkpoint { optimizer: None, .. }) => {
            Err(Error::Checkpoint("checkpoint has no optimizer state to resume from".into()))
        }
        None => train_from(cloud, config, initial_field(config), hooks),
    }
}

/// Train starting from a given field with fresh optimizer state.
pub fn train_from(cloud: &PointCloud, config: &TrainConfig, field: NeuralField, hooks: Hooks) -> Result<(NeuralField, TrainHistory)> {
    config.validate()?;
    if field.arch != config.arch {
        return Err(Error::Incompatible("initial field architecture differs from the configuration".into()));
    }
    let adam = AdamState::new(field.params.len(), config.lr.eval(0.0)).with_betas(config.beta1, config.beta2, config.adam_eps);
    run(cloud, config, field, adam, 0, hooks)
}

fn run(
    cloud: &PointCloud,
    config: &TrainConfig,
    mut field: NeuralField,
    mut adam: AdamState,
    start: usize,
    mut hooks: Hooks,
) -> Result<(NeuralField, TrainHistory)> {
    if cloud.dim() != config.arch.input_dim {
        return Err(Error::Incompatible(format!(
            "cloud dimension {} differs from the network input dimension {}",
            cloud.dim(),
            config.arch.input_dim
        )));
    }
    if cloud.is_empty() {
        return Err(Error::invalid("cannot train on an empty cloud"));
    }
    let total = config.iterations;
    let base_lr = |it: usize| config.lr.eval(it as f64 / total as f64);
    // Recover the recovery factor applied before the checkpoint, as a power of two.
    let mut lr_factor = if start == 0 {
        1.0
    } else {
        2f64.powi((adam.lr / base_lr(start - 1)).log2().round() as i32)
    };

    let timer = Instant::now();
    let mut history = TrainHistory::default();
    let snapshot_every = if config.checkpoint_interval > 0 { config.checkpoint_interval } else { 100 };
    let mut snapshot = (field.clone(), adam.clone(), start);
    let mut last_written: Option<PathBuf> = None;
    let mut retried = false;
    let mut it = start;
    let end = config.halt_at.map_or(total, |h| h.min(total));
    while it < end {
        let step = iteration(cloud, config, &field, it);
        let failure = match &step {
            Ok((b, g)) if b.total.is_finite() && g.iter().all(|v| v.is_finite()) => None,
            Ok(_) => Some("non-finite loss or gradient".to_string()),
            Err(e) => Some(e.to_string()),
        };
        if let Some(message) = failure {
            if retried {
                return Err(Error::TrainingDivergence { iteration: it, message, last_checkpoint: last_written });
            }
            retried = true;
            history.recoveries += 1;
            lr_factor *= 0.5;
            field = snapshot.0.clone();
            adam = snapshot.1.clone();
            it = snapshot.2;
            history.records.retain(|r| r.iteration < it);
            history.evals.retain(|r| r.iteration <= it);
            continue;
        }
        let (breakdown, grads) = step.expect("checked above");
        adam.lr = base_lr(it) * lr_factor;
        adam_step(&mut adam, &mut field.params, &grads)?;
        let done = it + 1;

        if done % config.log_interval == 0 || done == total || it == start {
            let rec = TrainRecord {
                iteration: it,
                loss: breakdown,
                grad_norm: grads.iter().map(|g| g * g).sum::<f64>().sqrt(),
                lr: adam.lr,
                seconds: timer.elapsed().as_secs_f64(),
            };
            if let Some(f) = hooks.on_record.as_mut() {
                f(&rec);
            }
            history.records.push(rec);
        }
        if config.eval_interval > 0 && done % config.eval_interval == 0 {
            history.evals.push(boundary_fit(&field, cloud, done));
            if let Some(f) = hooks.on_eval.as_mut() {
                f(done, &field);
            }
        }
        if done % snapshot_every == 0 || done == end {
            snapshot = (field.clone(), adam.clone(), done);
        }
        if config.checkpoint_interval > 0 && (done % config.checkpoint_interval == 0 || done == end) {
            if let Some(path) = &config.checkpoint_path {
                save_checkpoint(path, &field, Some((&adam, done)))?;
                last_written = Some(path.clone());
            }
        }
        it = done;
    }
    Ok((field, history))
}

/// Mean and max `|u|` over the whole cloud.
pub fn boundary_fit(field: &NeuralField, cloud: &PointCloud, iteration: usize) -> EvalRecord {
    let v = field.forward_batch(cloud.as_flat());
    let mean_abs = v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64;
    let max_abs = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    EvalRecord { iteration, mean_abs, max_abs }
}

/// Loss and parameter gradient of one iteration.
fn iteration(cloud: &PointCloud, config: &TrainConfig, field: &NeuralField, it: usize) -> Result<(LossBreakdown, Vec<f64>)> {
    let d = cloud.dim();
    let total = config.iterations;
    let eff = config.loss.at(it as f64 / total as f64);
    let b = config.boundary_size(cloud.len());
    let mut r = rng::stream(config.seed, "boundary-batch", it as u64);
    let mut picks = index::sample(&mut r, cloud.len(), b).into_vec();
    picks.sort_unstable();
    let batch = cloud.subset(&picks);
    let volume = losses::sample_volume(&config.domain, &batch, config.n_uniform, config.n_gauss, config.sigma, config.seed, it as u64)?;

    let btape = field.record(batch.as_flat(), false);
    let vtape = field.record(&volume.points, true);
    let bv = &btape.eval.values;
    let ve = &vtape.eval;

    let mut badj = Adjoints::zeros(bv.len(), d);
    let mut vadj = Adjoints::zeros(ve.len(), d);
    let p = config.loss.p;
    let mut terms = TermValues { boundary: losses::boundary_loss_adjoint(bv, p, eff.w_boundary, &mut badj), ..Default::default() };
    // Terms with zero weight are still reported; their adjoints are skipped.
    macro_rules! term {
        ($w:expr, $plain:expr, $adj:expr) => {
            if $w > 0.0 {
                $adj
            } else {
                $plain
            }
        };
    }
    terms.eikonal = term!(
        eff.w_eikonal,
        losses::eikonal_loss(ve, &volume, p),
        losses::eikonal_loss_adjoint(ve, &volume, p, eff.w_eikonal, &mut vadj)
    );
    terms.heat = term!(
        eff.w_heat,
        losses::heat_loss(ve, &volume, eff.lambda),
        losses::heat_loss_adjoint(ve, &volume, eff.lambda, eff.w_heat, &mut vadj)
    );
    if eff.w_area > 0.0 {
        terms.area = losses::area_loss_adjoint(ve, &volume, eff.lambda, eff.w_area, &mut vadj);
    }
    if eff.w_phase > 0.0 {
        let ph = &config.loss.phase;
        terms.phase = losses::phase_loss_adjoint(ve, &volume, ph.eps, ph.clamp, eff.w_phase, &mut vadj);
    }
    if eff.w_sal > 0.0 {
        let dist = losses::cloud_distances(&volume.points, &batch);
        terms.sal = losses::sal_loss_adjoint(&ve.values, &dist, eff.w_sal, &mut vadj);
    }
    let breakdown = losses::total_loss(&terms, &config.loss, it, total);
    let mut grads = field.backward(&btape, &badj);
    let gv = field.backward(&vtape, &vadj);
    for (a, b) in grads.iter_mut().zip(gv) {
        *a += b;
    }
    Ok((breakdown, grads))
}

/// Least-squares slope of `ys` against `xs`, with its standard error.
pub fn slope_with_error(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = xs.iter().zip(ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let se = (resid / (n - 2.0) / sxx).sqrt();
    (slope, se)
}

/// Activation and architecture shared by the small desk-scale configurations.
pub fn desk_arch(dim: usize, width: usize, layers: usize) -> Architecture {
    Architecture::new(dim, width, layers, Activation::Softplus { beta: 100.0 }).expect("valid architecture")
}

/// Reduced configuration that fits a single CPU core: a 64 x 3 network, 768
/// volume samples, 256 boundary points per batch and the squared eikonal
/// penalty ramped up over the second half of training.
pub fn desk_config(dim: usize) -> TrainConfig {
    let mut c = TrainConfig::default_for(dim);
    c.iterations = 20_000;
    c.arch = desk_arch(dim, 64, 3);
    c.n_uniform = 384;
    c.n_gauss = 384;
    c.boundary_batch = Some(256);
    c.lr = Schedule::ramp(0.0, 1e-3, 1.0, 1e-4).expect("valid ramp");
    c.loss.p = 2;
    c.loss.w_eikonal = Schedule::ramp(0.5, 0.1, 1.0, 3.0).expect("valid ramp");
    c.loss.w_heat = Schedule::ramp(0.5, 1.0, 1.0, 0.1).expect("valid ramp");
    c.log_interval = 100;
    c
}
