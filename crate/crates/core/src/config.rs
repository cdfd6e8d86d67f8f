//! Flat `key = value` configuration text for losses and training.
//!
//! One key per line, `#` starts a comment. Scalar schedules accept either a
//! constant (`lambda = 20`) or knots under a dotted key
//! (`lambda.knots = 0:10,0.8:50`). Unknown keys are errors.

use std::fmt::Write as _;

use crate::field::{Activation, Architecture};
use crate::losses::{Domain, LossConfig, Schedule};
use crate::trainer::{InitKind, TrainConfig};
use crate::{Error, Result};

/// `(line number, key, value)` for every non-blank, non-comment line.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected `key = value`, got {line:?}") })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Parse { line: i + 1, message: "missing key".into() });
        }
        out.push((i + 1, k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::InvalidConfig(format!("{key}: cannot parse {value:?}: {e}")))
}

fn schedule(key: &str, value: &str, knots: bool) -> Result<Schedule> {
    let r = if knots { Schedule::parse_knots(value) } else { num::<f64>(key, value).map(Schedule::constant) };
    r.map_err(|e| match e {
        Error::InvalidConfig(m) if !m.starts_with(key) => Error::InvalidConfig(format!("{key}: {m}")),
        other => other,
    })
}

fn write_schedule(out: &mut String, key: &str, s: &Schedule) {
    if s.knots().len() == 1 {
        let _ = writeln!(out, "{key} = {}", s.knots()[0].1);
    } else {
        let _ = writeln!(out, "{key}.knots = {}", s.to_knot_string());
    }
}

fn loss_schedule<'a>(c: &'a mut LossConfig, name: &str) -> Option<&'a mut Schedule> {
    Some(match name {
        "w_b" => &mut c.w_boundary,
        "w_e" => &mut c.w_eikonal,
        "w_h" => &mut c.w_heat,
        "w_area" => &mut c.w_area,
        "w_sal" => &mut c.w_sal,
        "w_phase" => &mut c.w_phase,
        "lambda" => &mut c.lambda,
        _ => return None,
    })
}

/// Apply one loss key. Returns `Ok(false)` when the key is not a loss key.
pub fn set_loss_key(c: &mut LossConfig, key: &str, value: &str) -> Result<bool> {
    let (base, knots) = match key.strip_suffix(".knots") {
        Some(b) => (b, true),
        None => (key, false),
    };
    if let Some(slot) = loss_schedule(c, base) {
        *slot = schedule(key, value, knots)?;
        return Ok(true);
    }
    match key {
        "p" => c.p = num(key, value)?,
        "phase.eps" => c.phase.eps = num(key, value)?,
        "phase.clamp" => c.phase.clamp = num(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

pub fn loss_config_to_text(c: &LossConfig) -> String {
    let mut s = String::new();
    for (name, sched) in c.weights_named() {
        write_schedule(&mut s, name, sched);
    }
    write_schedule(&mut s, "lambda", &c.lambda);
    let _ = writeln!(s, "p = {}", c.p);
    let _ = writeln!(s, "phase.eps = {}", c.phase.eps);
    let _ = writeln!(s, "phase.clamp = {}", c.phase.clamp);
    s
}

/// Parse loss keys on top of `base`.
pub fn parse_loss_config(text: &str, base: LossConfig) -> Result<LossConfig> {
    let mut c = base;
    for (line, k, v) in parse_pairs(text)? {
        if !set_loss_key(&mut c, &k, &v).map_err(|e| at_line(e, line))? {
            return Err(Error::Parse { line, message: format!("unknown key {k:?}") });
        }
    }
    c.validate()?;
    Ok(c)
}

fn at_line(e: Error, line: usize) -> Error {
    match e {
        Error::InvalidConfig(m) => Error::Parse { line, message: m },
        other => other,
    }
}

/// Apply one training or loss key.
pub fn set_train_key(c: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    if set_loss_key(&mut c.loss, key, value)? {
        return Ok(());
    }
    let (base, knots) = match key.strip_suffix(".knots") {
        Some(b) => (b, true),
        None => (key, false),
    };
    if base == "lr" {
        c.lr = schedule(key, value, knots)?;
        return Ok(());
    }
    match key {
        "iterations" => c.iterations = num(key, value)?,
        "width" => c.arch.width = num(key, value)?,
        "layers" => c.arch.layers = num(key, value)?,
        "activation" => {
            c.arch.activation = match value {
                "softplus" => Activation::Softplus { beta: 100.0 },
                "sine" => Activation::Sine { omega0: 30.0 },
                _ => return Err(Error::InvalidConfig(format!("{key}: expected softplus or sine, got {value:?}"))),
            }
        }
        "activation.beta" => match &mut c.arch.activation {
            Activation::Softplus { beta } => *beta = num(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("{key}: activation is not softplus"))),
        },
        "activation.omega0" => match &mut c.arch.activation {
            Activation::Sine { omega0 } => *omega0 = num(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("{key}: activation is not sine"))),
        },
        "init" => {
            let r = init_radius(&c.init);
            c.init = match value {
                "geometric" => InitKind::Geometric { radius: r },
                "analytic" => InitKind::Analytic { radius: r },
                "random" => InitKind::Random,
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "{key}: expected geometric, analytic or random, got {value:?}"
                    )))
                }
            }
        }
        "init.radius" => match &mut c.init {
            InitKind::Geometric { radius } | InitKind::Analytic { radius } => *radius = num(key, value)?,
            InitKind::Random => return Err(Error::InvalidConfig(format!("{key}: random init has no radius"))),
        },
        "prefit.samples" => c.prefit.samples = num(key, value)?,
        "prefit.steps" => c.prefit.steps = num(key, value)?,
        "prefit.lr" => c.prefit.lr = num(key, value)?,
        "prefit.extent" => c.prefit.extent = num(key, value)?,
        "boundary_fraction" => c.boundary_fraction = num(key, value)?,
        "boundary_batch" => {
            c.boundary_batch = if value == "auto" { None } else { Some(num(key, value)?) };
        }
        "n_uniform" => c.n_uniform = num(key, value)?,
        "n_gauss" => c.n_gauss = num(key, value)?,
        "sigma" => c.sigma = num(key, value)?,
        "domain_half" => {
            let h: f64 = num(key, value)?;
            if !(h > 0.0) {
                return Err(Error::InvalidConfig(format!("{key}: must be positive")));
            }
            c.domain = Domain::cube(c.arch.input_dim, h);
        }
        "beta1" => c.beta1 = num(key, value)?,
        "beta2" => c.beta2 = num(key, value)?,
        "adam_eps" => c.adam_eps = num(key, value)?,
        "seed" => c.seed = num(key, value)?,
        "checkpoint_interval" => c.checkpoint_interval = num(key, value)?,
        "log_interval" => c.log_interval = num(key, value)?,
        "eval_interval" => c.eval_interval = num(key, value)?,
        _ => return Err(Error::InvalidConfig(format!("unknown key {key:?}"))),
    }
    Ok(())
}

fn init_radius(k: &InitKind) -> f64 {
    match k {
        InitKind::Geometric { radius } | InitKind::Analytic { radius } => *radius,
        InitKind::Random => 0.5,
    }
}

/// Parse training keys on top of `base`, then validate.
pub fn parse_train_config(text: &str, base: TrainConfig) -> Result<TrainConfig> {
    let mut c = base;
    for (line, k, v) in parse_pairs(text)? {
        set_train_key(&mut c, &k, &v).map_err(|e| at_line(e, line))?;
    }
    c.validate()?;
    Ok(c)
}

/// Every key needed to rebuild `c` with [`parse_train_config`] from
/// `TrainConfig::default_for(dim)`. The checkpoint path is not included.
pub fn train_config_to_text(c: &TrainConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "iterations = {}", c.iterations);
    let _ = writeln!(s, "width = {}", c.arch.width);
    let _ = writeln!(s, "layers = {}", c.arch.layers);
    match c.arch.activation {
        Activation::Softplus { beta } => {
            let _ = writeln!(s, "activation = softplus\nactivation.beta = {beta}");
        }
        Activation::Sine { omega0 } => {
            let _ = writeln!(s, "activation = sine\nactivation.omega0 = {omega0}");
        }
    }
    match c.init {
        InitKind::Geometric { radius } => {
            let _ = writeln!(s, "init = geometric\ninit.radius = {radius}");
        }
        InitKind::Analytic { radius } => {
            let _ = writeln!(s, "init = analytic\ninit.radius = {radius}");
        }
        InitKind::Random => {
            let _ = writeln!(s, "init = random");
        }
    }
    let p = &c.prefit;
    let _ = writeln!(s, "prefit.samples = {}\nprefit.steps = {}\nprefit.lr = {}\nprefit.extent = {}", p.samples, p.steps, p.lr, p.extent);
    let _ = writeln!(s, "boundary_fraction = {}", c.boundary_fraction);
    let _ = writeln!(s, "boundary_batch = {}", c.boundary_batch.map_or("auto".to_string(), |b| b.to_string()));
    let _ = writeln!(s, "n_uniform = {}\nn_gauss = {}\nsigma = {}", c.n_uniform, c.n_gauss, c.sigma);
    let _ = writeln!(s, "domain_half = {}", c.domain.upper[0]);
    write_schedule(&mut s, "lr", &c.lr);
    let _ = writeln!(s, "beta1 = {}\nbeta2 = {}\nadam_eps = {}", c.beta1, c.beta2, c.adam_eps);
    let _ = writeln!(s, "seed = {}", c.seed);
    let _ = writeln!(s, "checkpoint_interval = {}", c.checkpoint_interval);
    let _ = writeln!(s, "log_interval = {}\neval_interval = {}", c.log_interval, c.eval_interval);
    s.push_str(&loss_config_to_text(&c.loss));
    s
}

/// Architecture check used when the dimension comes from data.
pub fn with_dim(c: &TrainConfig, dim: usize) -> Result<TrainConfig> {
    let mut out = c.clone();
    out.arch = Architecture { input_dim: dim, ..c.arch.clone() };
    let half = c.domain.upper[0];
    out.domain = Domain::cube(dim, half);
    out.validate()?;
    Ok(out)
}
