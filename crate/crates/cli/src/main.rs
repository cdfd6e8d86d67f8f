//! `hotspot` command line: data generation, training, evaluation, sphere
//! tracing, oracle validation and the 1D demonstration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use hotspot::config::{parse_train_config, set_train_key, train_config_to_text, with_dim};
use hotspot::eval::{
    depth_map, evaluate_grids, grid_eval, iteration_histogram_csv, iteration_map, normal_map, pose_ring, sample_level_set,
    sdf_heatmap, sphere_trace, write_ppm, EvalConfig, TraceOptions,
};
use hotspot::field::{load_checkpoint, NeuralField};
use hotspot::geometry::{
    extract_level_set, load_cloud, load_grid, normalize_cloud, sample_boundary, save_cloud, save_grid, signed_distance_oracle,
    GridSpec, PointCloud, ScalarGrid, Shape,
};
use hotspot::trainer::{demo_1d, desk_config, fmt9, train_with, DemoMode, Hooks, TrainConfig, TrainRecord};
use hotspot::validate::{run_suite, Suite, ValidateOptions};
use hotspot::{parallel, Error};

#[derive(Parser)]
#[command(name = "hotspot", version, about = "Neural signed distance fields with a screened-Poisson heat loss")]
struct Cli {
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads [default: HOTSPOT_THREADS or all cores]. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a preset shape into a point cloud and its exact SDF grid.
    Gen(GenArgs),
    /// Fit a field to a point cloud.
    Train(TrainArgs),
    /// Compare a field or grid with a ground-truth grid.
    Eval(EvalArgs),
    /// Sphere-trace a 3D field from a ring of cameras.
    Trace(TraceArgs),
    /// Run the numerical self-checks.
    Validate(ValidateArgs),
    /// One-dimensional two-point demonstration.
    Demo1d(DemoArgs),
}

#[derive(Args)]
struct GenArgs {
    /// circle, square, rings, star, sphere or torus.
    shape: String,
    /// Radius (circle, sphere).
    #[arg(long)]
    r: Option<f64>,
    /// Half side length (square).
    #[arg(long)]
    half: Option<f64>,
    /// Outer radius (rings, star).
    #[arg(long)]
    outer: Option<f64>,
    /// Inner radius (rings, star).
    #[arg(long)]
    inner: Option<f64>,
    /// Number of star points.
    #[arg(long)]
    points: Option<usize>,
    /// Major radius (torus).
    #[arg(long)]
    major: Option<f64>,
    /// Minor radius (torus).
    #[arg(long)]
    minor: Option<f64>,
    /// Number of boundary samples.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Cells per axis of the ground-truth grid [default: 256 in 2D, 128 in 3D].
    #[arg(long)]
    res: Option<usize>,
    /// Half width of the ground-truth grid box.
    #[arg(long, default_value_t = 1.0)]
    extent: f64,
    /// Center and rescale the cloud; the grid follows the stored frame.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Point cloud file.
    #[arg(long)]
    cloud: PathBuf,
    /// Base settings the config file and overrides apply to.
    #[arg(long, value_enum, default_value = "default")]
    preset: Preset,
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Resume from a checkpoint holding optimizer state.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Stop after this many iterations without changing the schedules; resume later with --resume.
    #[arg(long)]
    stop_after: Option<usize>,
    /// Print every logged record to stdout as `key=value` pairs.
    #[arg(long)]
    log_machine: bool,
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Trained checkpoint.
    #[arg(long, conflicts_with = "pred_grid", required_unless_present = "pred_grid")]
    model: Option<PathBuf>,
    /// Predicted SDF grid instead of a model.
    #[arg(long)]
    pred_grid: Option<PathBuf>,
    /// Ground-truth SDF grid.
    #[arg(long)]
    gt: PathBuf,
    /// Reference surface points [default: sampled from the ground-truth zero level set].
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Surface samples for Chamfer and Hausdorff.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Near-surface band for the `_near` metrics.
    #[arg(long, default_value_t = 0.1)]
    near: f64,
    #[arg(long, default_value = "eval")]
    out: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    /// Trained 3D checkpoint.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 10)]
    poses: usize,
    /// Camera distance from the vertical axis.
    #[arg(long, default_value_t = 1.5)]
    radius: f64,
    /// Camera height.
    #[arg(long, default_value_t = 0.5)]
    height: f64,
    /// Image width and height in pixels.
    #[arg(long, default_value_t = 128)]
    res: usize,
    #[arg(long, default_value_t = 30)]
    max_steps: u32,
    #[arg(long, default_value_t = 5e-5)]
    threshold: f64,
    #[arg(long, default_value = "trace")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// closed_forms, bounds, convergence, stability, autodiff or all.
    #[arg(default_value = "all")]
    suite: String,
    /// Random source configurations for the bound check.
    #[arg(long, default_value_t = 100)]
    configs: usize,
    /// Queries per configuration.
    #[arg(long, default_value_t = 100)]
    queries: usize,
    /// Random networks for the derivative check.
    #[arg(long, default_value_t = 20)]
    nets: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Full-size network and sample counts.
    Default,
    /// Reduced network and batches for a single CPU core.
    Desk,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    WithHeat,
    EikonalOnly,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, value_enum, default_value = "with-heat")]
    mode: ModeArg,
    #[arg(long, default_value = "demo1d")]
    out: PathBuf,
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::TrainingDivergence { .. } | Error::NumericalFailure { .. } => 2,
            Error::Incompatible(_) | Error::Checkpoint(_) => 3,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn incompatible(message: impl Into<String>) -> Failure {
    Failure { code: 3, message: message.into() }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    parallel::init_threads(cli.threads);
    let seed = cli.seed;
    let result = parallel::install(move || match cli.command {
        Command::Gen(a) => gen(a, seed.unwrap_or(0)),
        Command::Train(a) => train(a, seed),
        Command::Eval(a) => eval(a, seed.unwrap_or(0)),
        Command::Trace(a) => trace(a),
        Command::Validate(a) => validate(a, seed.unwrap_or(0)),
        Command::Demo1d(a) => demo(a, seed.unwrap_or(0)),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Run record written at the end of a command.
struct Manifest {
    command: String,
    seed: u64,
    started: Instant,
    inputs: Vec<(String, PathBuf)>,
    outputs: Vec<PathBuf>,
    notes: Vec<(String, String)>,
}

impl Manifest {
    fn new(command: &str, seed: u64) -> Self {
        Manifest { command: command.into(), seed, started: Instant::now(), inputs: vec![], outputs: vec![], notes: vec![] }
    }

    fn input(&mut self, role: &str, path: &Path) {
        self.inputs.push((role.into(), path.to_path_buf()));
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.into(), value.to_string()));
    }

    /// Write `bytes` to `path` and list it as an output.
    fn emit(&mut self, path: PathBuf, bytes: impl AsRef<[u8]>) -> std::io::Result<()> {
        fs::write(&path, bytes)?;
        self.outputs.push(path);
        Ok(())
    }

    fn write(self, dir: &Path) -> std::io::Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "seed = {}", self.seed);
        for (k, v) in &self.notes {
            let _ = writeln!(s, "{k} = {v}");
        }
        for (role, p) in &self.inputs {
            let hash = fs::read(p).map(|b| hex_digest(&b)).unwrap_or_else(|_| "unreadable".into());
            let _ = writeln!(s, "input.{role} = {} sha256:{hash}", p.display());
        }
        for p in &self.outputs {
            let hash = fs::read(p).map(|b| hex_digest(&b)).unwrap_or_else(|_| "unreadable".into());
            let _ = writeln!(s, "output = {} sha256:{hash}", p.display());
        }
        let _ = writeln!(s, "wall_seconds = {:.3}", self.started.elapsed().as_secs_f64());
        let tmp = dir.join("manifest.txt.tmp");
        fs::write(&tmp, s)?;
        fs::rename(tmp, dir.join("manifest.txt"))
    }
}

fn build_shape(a: &GenArgs) -> Result<Shape, Failure> {
    let shape = match a.shape.as_str() {
        "circle" => Shape::circle([0.0, 0.0], a.r.unwrap_or(0.5)),
        "square" => {
            let h = a.half.unwrap_or(0.5);
            Shape::rectangle([-h, -h], [h, h])
        }
        "rings" => {
            let outer = Shape::circle([0.0, 0.0], a.outer.unwrap_or(0.6))?;
            Shape::difference(outer, Shape::circle([0.0, 0.0], a.inner.unwrap_or(0.3))?)
        }
        "star" => Shape::star([0.0, 0.0], a.outer.unwrap_or(0.6), a.inner.unwrap_or(0.3), a.points.unwrap_or(5)),
        "sphere" => Shape::sphere([0.0; 3], a.r.unwrap_or(0.5)),
        "torus" => Shape::torus([0.0; 3], a.major.unwrap_or(0.35), a.minor.unwrap_or(0.12)),
        other => return Err(usage(format!("unknown shape '{other}'; expected one of {}", Shape::PRESETS.join(", ")))),
    };
    Ok(shape?)
}

fn gen(a: GenArgs, seed: u64) -> Outcome {
    let shape = build_shape(&a)?;
    if a.n == 0 {
        return Err(usage("--n must be positive"));
    }
    let dim = shape.dim();
    let mut cloud = sample_boundary(&shape, a.n, seed);
    if a.normalize {
        cloud = normalize_cloud(&cloud, 1.0, 0.9)?;
    }
    let t = cloud.transform.clone();
    let res = a.res.unwrap_or(EvalConfig::default_for(dim).res);
    let spec = GridSpec::new(vec![-a.extent; dim], vec![a.extent; dim], vec![res; dim])?;
    let values = (0..spec.len())
        .map(|i| Ok(signed_distance_oracle(&shape, &t.to_source(&spec.point(i)))? / t.scale))
        .collect::<hotspot::Result<Vec<f64>>>()?;
    let grid = ScalarGrid::new(spec, values)?;

    fs::create_dir_all(&a.out)?;
    let mut m = Manifest::new("gen", seed);
    m.note("shape", &a.shape);
    m.note("n", a.n);
    m.note("grid_res", res);
    let cloud_path = a.out.join("cloud.xyz");
    save_cloud(&cloud, &cloud_path)?;
    m.outputs.push(cloud_path);
    let grid_path = a.out.join("gt_grid.txt");
    save_grid(&grid, &grid_path)?;
    m.outputs.push(grid_path);
    if a.normalize {
        let offs: Vec<String> = t.offset.iter().map(|o| o.to_string()).collect();
        m.emit(a.out.join("transform.txt"), format!("scale = {}\noffset = {}\n", t.scale, offs.join(" ")))?;
    }
    m.write(&a.out)?;
    println!("wrote {} points and a {res}^{dim} grid to {}", cloud.len(), a.out.display());
    Ok(())
}

fn train_config(a: &TrainArgs, cloud: &PointCloud, seed: Option<u64>) -> Result<TrainConfig, Failure> {
    let base = match a.preset {
        Preset::Default => TrainConfig::default_for(cloud.dim()),
        Preset::Desk => desk_config(cloud.dim()),
    };
    let mut c = match &a.config {
        Some(p) => parse_train_config(&fs::read_to_string(p)?, base)?,
        None => base,
    };
    for kv in &a.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        set_train_key(&mut c, k.trim(), v.trim())?;
    }
    if let Some(s) = seed {
        c.seed = s;
    }
    let mut c = with_dim(&c, cloud.dim())?;
    if c.checkpoint_interval == 0 {
        c.checkpoint_interval = c.iterations;
    }
    c.checkpoint_path = Some(a.out.join("model.ckpt"));
    c.halt_at = a.stop_after;
    Ok(c)
}

fn record_line(r: &TrainRecord) -> String {
    let b = &r.loss;
    format!(
        "iteration={} total={} boundary={} eikonal={} heat={} lambda={} grad_norm={} lr={}",
        r.iteration,
        fmt9(b.total),
        fmt9(b.terms.boundary),
        fmt9(b.terms.eikonal),
        fmt9(b.terms.heat),
        fmt9(b.effective.lambda),
        fmt9(r.grad_norm),
        fmt9(r.lr)
    )
}

fn train(a: TrainArgs, seed: Option<u64>) -> Outcome {
    let cloud = load_cloud(&a.cloud)?;
    let cfg = train_config(&a, &cloud, seed)?;
    let resume = a.resume.as_ref().map(load_checkpoint).transpose()?;
    fs::create_dir_all(&a.out)?;
    let mut m = Manifest::new("train", cfg.seed);
    m.input("cloud", &a.cloud);
    m.note("preset", a.preset.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default());
    if let Some(p) = &a.config {
        m.input("config", p);
    }
    if let Some(p) = &a.resume {
        m.input("resume", p);
    }
    for kv in &a.set {
        m.note("override", kv);
    }
    m.emit(a.out.join("config.txt"), train_config_to_text(&cfg))?;

    let progress_every = (cfg.iterations / 20).max(1);
    let machine = a.log_machine;
    let mut on_record = |r: &TrainRecord| {
        if machine {
            println!("{}", record_line(r));
        }
        if (r.iteration + 1) % progress_every == 0 || r.iteration == 0 {
            eprintln!("[{:>7.1}s] {}", r.seconds, record_line(r));
        }
    };
    let hooks = Hooks { on_record: Some(&mut on_record), on_eval: None };
    let (_, history) = train_with(&cloud, &cfg, resume, hooks)?;
    m.outputs.push(a.out.join("model.ckpt"));
    m.emit(a.out.join("history.csv"), history.to_csv())?;
    m.note("recoveries", history.recoveries);
    m.write(&a.out)?;
    if let Some(last) = history.records.last() {
        eprintln!("done: {}", record_line(last));
    }
    Ok(())
}

fn load_field(path: &Path) -> Result<NeuralField, Failure> {
    Ok(load_checkpoint(path)?.field)
}

fn eval(a: EvalArgs, seed: u64) -> Outcome {
    let gt = load_grid(&a.gt)?;
    let dim = gt.spec.dim();
    let pred = match (&a.model, &a.pred_grid) {
        (Some(p), _) => {
            let f = load_field(p)?;
            if f.dim() != dim {
                return Err(incompatible(format!("model is {}-dimensional, ground truth {dim}-dimensional", f.dim())));
            }
            grid_eval(&f, &gt.spec)?
        }
        (None, Some(p)) => load_grid(p)?,
        (None, None) => return Err(usage("one of --model or --pred-grid is required")),
    };
    if pred.spec != gt.spec {
        return Err(incompatible("predicted and ground-truth grids have different specifications"));
    }
    let cfg = EvalConfig { res: gt.spec.res[0], half: gt.spec.upper[0], near_threshold: a.near, samples: a.samples, seed };
    let reference = match &a.reference {
        Some(p) => load_cloud(p)?,
        None => {
            let set = extract_level_set(&gt, 0.0)?;
            if set.is_empty() {
                return Err(usage("ground-truth grid has no zero level set"));
            }
            sample_level_set(&set, a.samples, seed)?
        }
    };
    if reference.dim() != dim {
        return Err(incompatible("reference points and grid differ in dimension"));
    }
    let report = evaluate_grids(&pred, &gt, &reference, &cfg)?;

    let renders = a.out.join("renders");
    fs::create_dir_all(&renders)?;
    let mut m = Manifest::new("eval", seed);
    m.input("gt", &a.gt);
    if let Some(p) = a.model.as_ref().or(a.pred_grid.as_ref()) {
        m.input("prediction", p);
    }
    if let Some(p) = &a.reference {
        m.input("reference", p);
    }
    let summary = report.summary_line();
    m.emit(a.out.join("metrics.csv"), report.to_csv())?;
    m.emit(a.out.join("summary.txt"), format!("{summary}\n"))?;
    for (name, grid) in [("pred_sdf.ppm", &pred), ("gt_sdf.ppm", &gt)] {
        let path = renders.join(name);
        write_ppm(&sdf_heatmap(grid)?, &path)?;
        m.outputs.push(path);
    }
    m.write(&a.out)?;
    println!("{summary}");
    Ok(())
}

fn trace(a: TraceArgs) -> Outcome {
    let field = load_field(&a.model)?;
    if field.dim() != 3 {
        return Err(incompatible(format!("sphere tracing needs a 3D model, got {}D", field.dim())));
    }
    if a.poses == 0 || a.res == 0 {
        return Err(usage("--poses and --res must be positive"));
    }
    let opts = TraceOptions { max_steps: a.max_steps, threshold: a.threshold };
    let renders = a.out.join("renders");
    fs::create_dir_all(&renders)?;
    let mut m = Manifest::new("trace", 0);
    m.input("model", &a.model);
    let mut counts = vec![0usize; a.max_steps as usize + 1];
    let mut summary = String::from("pose,mean_iterations,median_iterations,max_iterations,hit_ratio\n");
    let mut means = Vec::new();
    for (k, cam) in pose_ring(a.poses, a.radius, a.height, a.res)?.iter().enumerate() {
        let r = sphere_trace(&field, cam, opts);
        for &it in &r.iterations {
            counts[(it as usize).min(a.max_steps as usize)] += 1;
        }
        let s = r.stats();
        means.push(s.mean_iterations);
        let _ = writeln!(summary, "{k},{},{},{},{}", fmt9(s.mean_iterations), fmt9(s.median_iterations), s.max_iterations, fmt9(s.hit_ratio));
        for (kind, img) in [("iterations", iteration_map(&r)), ("depth", depth_map(&r)), ("normals", normal_map(&r))] {
            let path = renders.join(format!("pose_{k:02}_{kind}.ppm"));
            write_ppm(&img, &path)?;
            m.outputs.push(path);
        }
        m.emit(renders.join(format!("pose_{k:02}_histogram.csv")), iteration_histogram_csv(&r))?;
    }
    let mut hist = String::from("iterations,count\n");
    for (i, c) in counts.iter().enumerate() {
        let _ = writeln!(hist, "{i},{c}");
    }
    m.emit(a.out.join("histogram.csv"), hist)?;
    m.emit(a.out.join("trace_summary.csv"), &summary)?;
    m.write(&a.out)?;
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    println!("poses={} mean_iterations={}", a.poses, fmt9(mean));
    Ok(())
}

fn validate(a: ValidateArgs, seed: u64) -> Outcome {
    let suites = Suite::parse(&a.suite)?;
    let opts = ValidateOptions { seed, bound_configs: a.configs, queries_per_config: a.queries, autodiff_nets: a.nets };
    let mut failed = 0;
    for s in suites {
        let r = run_suite(s, &opts)?;
        print!("{}", r.table());
        failed += r.checks.iter().filter(|c| !c.passed).count();
    }
    if failed > 0 {
        return Err(Failure { code: 1, message: format!("{failed} check(s) failed") });
    }
    Ok(())
}

fn demo(a: DemoArgs, seed: u64) -> Outcome {
    let mode = match a.mode {
        ModeArg::WithHeat => DemoMode::WithHeat,
        ModeArg::EikonalOnly => DemoMode::EikonalOnly,
    };
    let r = demo_1d(mode, seed)?;
    fs::create_dir_all(&a.out)?;
    let mut m = Manifest::new("demo1d", seed);
    m.note("mode", mode.name());
    m.emit(a.out.join("curve.csv"), r.curve_csv())?;
    let mut errs = String::from("iteration,max_error\n");
    for (it, e) in &r.error_curve {
        let _ = writeln!(errs, "{it},{}", fmt9(*e));
    }
    m.emit(a.out.join("error_curve.csv"), errs)?;
    m.write(&a.out)?;
    println!("mode={} final_error={}", mode.name(), fmt9(r.final_error));
    Ok(())
}
