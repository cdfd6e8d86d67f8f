use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{adam_step, Activation, AdamState, Adjoints, Architecture, NeuralField};
use crate::rng;

/// He-normal weights with zero biases (softplus), or SIREN's uniform scheme (sine).
pub fn init_random(arch: &Architecture, seed: u64) -> NeuralField {
    let mut r = rng::stream(seed, "init", 0);
    let mut params = Vec::with_capacity(arch.param_count());
    for (l, &(n_in, n_out)) in arch.layer_shapes().iter().enumerate() {
        match arch.activation {
            Activation::Softplus { .. } => {
                let normal = Normal::new(0.0, (2.0 / n_in as f64).sqrt()).unwrap();
                params.extend((0..n_in * n_out).map(|_| normal.sample(&mut r)));
            }
            Activation::Sine { omega0 } => {
                let bound = if l == 0 { 1.0 / n_in as f64 } else { (6.0 / n_in as f64).sqrt() / omega0 };
                params.extend((0..n_in * n_out).map(|_| r.random_range(-bound..bound)));
            }
        }
        params.extend(std::iter::repeat_n(0.0, n_out));
    }
    NeuralField { arch: arch.clone(), params }
}

/// Closed-form sphere initialisation for ReLU-like networks: hidden weights
/// `N(0, 2 / out)`, output weights near `sqrt(pi / in)` and output bias
/// `-radius`, which approximates `|x| - radius`. Falls back to
/// [`init_random`] for sine activations.
pub fn init_analytic(arch: &Architecture, radius: f64, seed: u64) -> NeuralField {
    if matches!(arch.activation, Activation::Sine { .. }) || arch.layers == 0 {
        return init_random(arch, seed);
    }
    let mut r = rng::stream(seed, "init", 0);
    let shapes = arch.layer_shapes();
    let last = shapes.len() - 1;
    let mut params = Vec::with_capacity(arch.param_count());
    for (l, &(n_in, n_out)) in shapes.iter().enumerate() {
        if l == last {
            let normal = Normal::new((std::f64::consts::PI / n_in as f64).sqrt(), 1e-5).unwrap();
            params.extend((0..n_in).map(|_| normal.sample(&mut r)));
            params.push(-radius);
        } else {
            let normal = Normal::new(0.0, (2.0 / n_out as f64).sqrt()).unwrap();
            params.extend((0..n_in * n_out).map(|_| normal.sample(&mut r)));
            params.extend(std::iter::repeat_n(0.0, n_out));
        }
    }
    NeuralField { arch: arch.clone(), params }
}

/// Supervised pre-fit settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefitConfig {
    pub samples: usize,
    pub steps: usize,
    pub lr: f64,
    /// Half-width of the sampling cube.
    pub extent: f64,
}

impl Default for PrefitConfig {
    fn default() -> Self {
        PrefitConfig { samples: 2000, steps: 1000, lr: 1e-3, extent: 1.0 }
    }
}

/// Regress `field` onto `target` by full-batch Adam on the mean squared error
/// over `cfg.samples` uniform points in `[-extent, extent]^d`.
pub fn fit_to_function(field: &mut NeuralField, target: impl Fn(&[f64]) -> f64, cfg: &PrefitConfig, seed: u64) {
    let d = field.dim();
    let mut r = rng::stream(seed, "prefit", 0);
    let points: Vec<f64> = (0..cfg.samples * d).map(|_| r.random_range(-cfg.extent..cfg.extent)).collect();
    let targets: Vec<f64> = points.chunks_exact(d).map(&target).collect();
    let mut adam = AdamState::new(field.params.len(), cfg.lr);
    let n = cfg.samples as f64;
    for _ in 0..cfg.steps {
        let tape = field.record(&points, false);
        let mut adj = Adjoints::zeros(cfg.samples, d);
        for (a, (u, t)) in adj.d_value.iter_mut().zip(tape.eval.values.iter().zip(&targets)) {
            *a = 2.0 * (u - t) / n;
        }
        let g = field.backward(&tape, &adj);
        if adam_step(&mut adam, &mut field.params, &g).is_err() {
            break;
        }
    }
}

/// Field approximating `|x| - radius`: the analytic initialisation followed
/// by a short supervised pre-fit.
pub fn init_geometric(arch: &Architecture, radius: f64, seed: u64) -> NeuralField {
    init_geometric_with(arch, radius, seed, &PrefitConfig::default())
}

pub fn init_geometric_with(arch: &Architecture, radius: f64, seed: u64, cfg: &PrefitConfig) -> NeuralField {
    let mut field = init_analytic(arch, radius, seed);
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    fit_to_function(&mut field, |x| norm(x) - radius, cfg, seed);
    field
}
