//! Command-line front end. [`run`] parses arguments, dispatches to the
//! library and maps the outcome to an exit code: 0 success, 1 runtime
//! failure, 2 usage error.

use std::ffi::OsString;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    load_manifest, load_sample, split, synth_dataset, write_gmap, write_manifest, write_sample_pngs, NoiseModel,
    Sample, SceneConfig,
};
use crate::error::{Error, Result};
use crate::geometry::{CameraConfig, CameraModel, HandEyeTransform};
use crate::labeler::label_ground_truth;
use crate::metrics::{format_report, percentile_nearest_rank, pitch_sweep, render_heatmap, SweepConfig};
use crate::nn::{load_checkpoint_file, save_checkpoint_file, NetConfig, NetInput, NetworkParams};
use crate::policy::{
    extract_grasp, plan_with_network, simulate_execution, OrientationMode, PlannerConfig, DEFAULT_GRIPPER_MAX_M,
};
use crate::train::{
    evaluate_losses, evaluate_mask_loss, gradient_check, train_stage1, train_stage2, AdamConfig, GradCheckConfig,
    LossRecord, LossWeights, TrainConfig,
};

/// Gradient check pass threshold on the maximum relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Settings shared by all subcommands, read from a TOML file:
///
/// ```text
/// camera = "camera.toml"
/// manifest = "data/manifest.tsv"
/// gripper_max = 0.4
///
/// [net]
/// input_size = 64
/// depth_levels = 4
/// base_channels = 16
/// seed = 0
///
/// [loss]
/// lambda_d = 1.0
///
/// [optimizer]
/// lr = 0.001
///
/// [noise]
/// sigma_d = 0.002
/// p_miss = 0.1
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    /// Camera intrinsics and hand-eye file.
    pub camera: Option<PathBuf>,
    /// Default dataset manifest.
    pub manifest: Option<PathBuf>,
    /// Meters.
    pub gripper_max: f64,
    pub net: NetConfig,
    pub loss: LossWeights,
    pub optimizer: AdamConfig,
    pub noise: NoiseModel,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            camera: None,
            manifest: None,
            gripper_max: DEFAULT_GRIPPER_MAX_M,
            net: NetConfig {
                input_size: 64,
                depth_levels: 4,
                base_channels: 16,
                seed: 0,
            },
            loss: LossWeights::default(),
            optimizer: AdamConfig::default(),
            noise: NoiseModel::default(),
        }
    }
}

impl AppConfig {
    /// Parses `text`, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: AppConfig = toml::from_str(text)?;
        for p in [&mut cfg.camera, &mut cfg.manifest].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(""))).map_err(|e| match e {
            Error::Config(e) => Error::Format {
                path: path.to_path_buf(),
                msg: e.to_string(),
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for p in [&self.camera, &self.manifest].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::InvalidConfig(format!("{} does not exist", p.display())));
            }
        }
        if !(self.gripper_max.is_finite() && self.gripper_max > 0.0) {
            return Err(Error::InvalidConfig(format!("gripper_max must be > 0, got {}", self.gripper_max)));
        }
        let n = self.net;
        NetConfig::new(n.input_size, n.depth_levels, n.base_channels, n.seed)?;
        self.loss.validate()?;
        self.optimizer.validate()?;
        self.noise.validate().map_err(Error::InvalidConfig)?;
        Ok(())
    }

    fn camera_config(&self) -> Result<Option<CameraConfig>> {
        self.camera.as_deref().map(CameraConfig::load).transpose()
    }

    fn camera_model(&self) -> Result<Option<CameraModel>> {
        self.camera_config()?.map(|c| c.camera()).transpose()
    }

    fn hand_eye(&self) -> Result<HandEyeTransform> {
        Ok(match self.camera_config()? {
            Some(c) => c.hand_eye()?,
            None => HandEyeTransform::identity(),
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "graspfuse", version, about = "Pixel-wise grasp synthesis from RGB-D observations")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic component (defaults to the configured net seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write ground-truth grasp maps for a manifest of samples.
    Label(LabelArgs),
    /// Generate synthetic tabletop scenes.
    Synth(SynthArgs),
    /// Stage 1: pretrain the background extraction module.
    PretrainBem(TrainArgs),
    /// Stage 2: train the grasp network on top of a pretrained module.
    Train(TrainArgs),
    /// Plan one grasp per manifest sample and score it in the simulator.
    Predict(PredictArgs),
    /// Run the metric protocol over synthetic pitch angles.
    Eval(EvalArgs),
    /// Compare analytic gradients with central differences.
    Gradcheck(GradcheckArgs),
    /// Time labeling, inference and planning.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct LabelArgs {
    /// Manifest of rgb/depth/mask triples (defaults to the configured one).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write quality heatmap overlays.
    #[arg(long)]
    overlays: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
    /// Image side (defaults to the configured network input size).
    #[arg(long)]
    size: Option<usize>,
    /// Camera pitch above the table, degrees.
    #[arg(long, default_value_t = 90.0)]
    pitch: f64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training manifest (defaults to the configured one).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 4)]
    batch: usize,
    #[arg(long)]
    lr: Option<f64>,
    /// Stop after this many optimizer steps.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Fraction of samples held out for the validation rows of the log.
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    /// Pretrained checkpoint from `pretrain-bem` (train only).
    #[arg(long)]
    bem: Option<PathBuf>,
    /// Output checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch loss CSV (defaults to the checkpoint path with a .csv extension).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Manifest to plan on (defaults to the configured one).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "viewpoint")]
    mode: OrientationMode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Comma-separated pitch angles, degrees.
    #[arg(long, default_value = "0,22.5,45,90", value_delimiter = ',')]
    pitch: Vec<f64>,
    /// Sensor noise, e.g. `sigma_d=0.002,p_miss=0.1` (defaults to the configured model).
    #[arg(long, value_parser = NoiseModel::parse)]
    noise: Option<NoiseModel>,
    #[arg(long, default_value_t = 200)]
    rgg_runs: usize,
    #[arg(long, default_value = "viewpoint")]
    mode: OrientationMode,
    #[arg(long)]
    out: PathBuf,
    /// Directory for one quality heatmap per angle.
    #[arg(long)]
    heatmaps: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 16)]
    size: usize,
    #[arg(long, default_value_t = 4)]
    base: usize,
    #[arg(long, default_value_t = 64)]
    per_class: usize,
    #[arg(long, default_value_t = 2)]
    per_layer: usize,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Image side (defaults to the configured network input size).
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, default_value_t = 8)]
    count: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
}

/// Runs the tool on `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.log_level);
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn init_logging(level: log::LevelFilter) {
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format(|buf, rec| {
            writeln!(
                buf,
                "level={} target={} {}",
                rec.level().as_str().to_ascii_lowercase(),
                rec.target(),
                rec.args()
            )
        })
        .try_init();
}

fn dispatch(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    let seed = cli.seed.unwrap_or(cfg.net.seed);
    cfg.net.seed = seed;
    match cli.command {
        Command::Label(a) => label(&cfg, a),
        Command::Synth(a) => synth(&cfg, seed, a),
        Command::PretrainBem(a) => pretrain_bem(&cfg, seed, a),
        Command::Train(a) => train(&cfg, seed, a),
        Command::Predict(a) => predict(&cfg, a),
        Command::Eval(a) => eval(&cfg, seed, a),
        Command::Gradcheck(a) => gradcheck(seed, a),
        Command::Bench(a) => bench(&cfg, seed, a),
    }
}

fn manifest_path(arg: Option<PathBuf>, cfg: &AppConfig, flag: &str) -> Result<PathBuf> {
    arg.or_else(|| cfg.manifest.clone())
        .ok_or_else(|| Error::InvalidArgument(format!("no manifest: pass {flag} or set `manifest` in the config")))
}

fn load_samples(manifest: &Path, cfg: &AppConfig, size: Option<usize>) -> Result<Vec<Sample>> {
    let camera = cfg.camera_model()?;
    let entries = load_manifest(manifest)?;
    if entries.is_empty() {
        return Err(Error::EmptyDataset);
    }
    entries.iter().map(|e| load_sample(e, camera.as_ref(), size)).collect()
}

fn label(cfg: &AppConfig, a: LabelArgs) -> Result<i32> {
    let manifest = manifest_path(a.input, cfg, "--input")?;
    let camera = cfg.camera_model()?;
    fs::create_dir_all(&a.out)?;
    let entries = load_manifest(&manifest)?;
    for e in &entries {
        let s = load_sample(e, camera.as_ref(), None)?;
        let stem = e.stem();
        write_gmap(&a.out.join(format!("{stem}.gmap")), &s.maps)?;
        if a.overlays {
            let label = label_ground_truth(&s.mask)?;
            let c = label.chord;
            let g = crate::geometry::ImageGrasp {
                u: c.center.0,
                v: c.center.1,
                phi: c.theta,
                width_px: c.length,
                quality: 1.0,
            };
            render_heatmap(&s.maps.quality, &s.observation.rgb, Some(&g), a.out.join(format!("{stem}_q.png")))?;
        }
        log::info!("labeled={stem} window_px={}", s.maps.quality.as_slice().iter().filter(|&&q| q > 0.0).count());
    }
    println!("labeled {} samples into {}", entries.len(), a.out.display());
    Ok(0)
}

fn synth(cfg: &AppConfig, seed: u64, a: SynthArgs) -> Result<i32> {
    let size = a.size.unwrap_or(cfg.net.input_size);
    let scene = SceneConfig {
        size,
        ..SceneConfig::default()
    }
    .with_pitch(a.pitch);
    let samples = synth_dataset(a.count, seed, &scene)?;
    fs::create_dir_all(&a.out)?;
    let mut entries = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        entries.push(write_sample_pngs(s, &a.out, &format!("scene_{i:04}"))?);
    }
    write_manifest(&a.out.join("manifest.tsv"), &entries)?;
    let cam = CameraConfig::new(&CameraModel::synthetic(size), &HandEyeTransform::identity());
    fs::write(a.out.join("camera.toml"), cam.to_toml())?;
    println!("wrote {} scenes to {}", samples.len(), a.out.display());
    Ok(0)
}

struct LossLog {
    file: fs::File,
}

impl LossLog {
    fn open(path: &Path) -> Result<Self> {
        let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            writeln!(file, "epoch,split,L_mask,L_depth,L_grasp,L_total")?;
        }
        Ok(Self { file })
    }

    fn row(&mut self, epoch: usize, split: &str, r: &LossRecord) -> Result<()> {
        writeln!(self.file, "{epoch},{split},{},{},{},{}", r.mask, r.depth, r.grasp, r.total)?;
        Ok(())
    }
}

fn train_setup(cfg: &AppConfig, seed: u64, a: &TrainArgs, size: usize) -> Result<(Vec<Sample>, Vec<Sample>, TrainConfig, LossLog)> {
    let manifest = manifest_path(a.data.clone(), cfg, "--data")?;
    let samples = load_samples(&manifest, cfg, Some(size))?;
    let (train, val) = if a.val_fraction > 0.0 && samples.len() >= 2 {
        split(samples, 1.0 - a.val_fraction, seed)?
    } else {
        (samples, Vec::new())
    };
    let mut adam = cfg.optimizer;
    if let Some(lr) = a.lr {
        adam.lr = lr;
    }
    let tc = TrainConfig {
        epochs: a.epochs,
        batch: a.batch,
        seed,
        adam,
        weights: cfg.loss,
        max_steps: a.max_steps,
    };
    let log_path = a.log.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    Ok((train, val, tc, LossLog::open(&log_path)?))
}

fn pretrain_bem(cfg: &AppConfig, seed: u64, a: TrainArgs) -> Result<i32> {
    let mut net = NetworkParams::build(cfg.net)?;
    let (train, val, tc, mut log) = train_setup(cfg, seed, &a, cfg.net.input_size)?;
    let mut failure = None;
    let report = train_stage1(&mut net, &train, &tc, &mut |r, net| {
        let mut step = || -> Result<()> {
            log.row(r.epoch, "train", r)?;
            if !val.is_empty() {
                let mask = evaluate_mask_loss(net, &val)?;
                log.row(r.epoch, "val", &LossRecord { mask, total: mask, ..*r })?;
            }
            Ok(())
        };
        if let Err(e) = step() {
            failure.get_or_insert(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    save_checkpoint_file(&net, &a.out)?;
    let last = report.epochs.last().map(|r| r.mask).unwrap_or(f64::NAN);
    println!("stage 1 done: {} steps, final L_mask {last:.6e}, checkpoint {}", report.steps.len(), a.out.display());
    Ok(0)
}

fn train(cfg: &AppConfig, seed: u64, a: TrainArgs) -> Result<i32> {
    let bem = a.bem.as_ref().ok_or(Error::MissingBem)?;
    let mut net = load_checkpoint_file(bem)?;
    let size = net.config().input_size;
    let (train, val, tc, mut log) = train_setup(cfg, seed, &a, size)?;
    let mut failure = None;
    let weights = tc.weights;
    let report = train_stage2(&mut net, &train, &tc, &mut |r, net| {
        let mut step = || -> Result<()> {
            log.row(r.epoch, "train", r)?;
            if !val.is_empty() {
                let p = evaluate_losses(net, &val, &weights)?;
                let rec = LossRecord {
                    mask: 0.0,
                    depth: p.depth,
                    grasp: p.grasp,
                    total: p.total,
                    ..*r
                };
                log.row(r.epoch, "val", &rec)?;
            }
            Ok(())
        };
        if let Err(e) = step() {
            failure.get_or_insert(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    save_checkpoint_file(&net, &a.out)?;
    let last = report.epochs.last().map(|r| r.grasp).unwrap_or(f64::NAN);
    println!("stage 2 done: {} steps, final L_grasp {last:.6e}, checkpoint {}", report.steps.len(), a.out.display());
    Ok(0)
}

fn predict(cfg: &AppConfig, a: PredictArgs) -> Result<i32> {
    let net = load_checkpoint_file(&a.checkpoint)?;
    let manifest = manifest_path(a.input, cfg, "--input")?;
    let samples = load_samples(&manifest, cfg, Some(net.config().input_size))?;
    let ext = cfg.hand_eye()?;
    let planner = PlannerConfig {
        mode: a.mode,
        ..Default::default()
    };
    let mut out = String::from("u,v,phi,width_m,quality,depth_source,planning_ms,success\n");
    let mut successes = 0;
    for s in &samples {
        let g = plan_with_network(&net, &s.observation, &ext, &planner)?;
        let ok = simulate_execution(s, &g, cfg.gripper_max);
        successes += ok as usize;
        let ig = g.image_grasp;
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{},{:.3},{}\n",
            ig.u,
            ig.v,
            ig.phi,
            g.robot_pose.width,
            ig.quality,
            g.depth_source.as_str(),
            1e3 * g.planning_time,
            ok
        ));
    }
    fs::write(&a.out, out)?;
    println!("planned {} grasps, {successes} simulated successes", samples.len());
    Ok(0)
}

fn eval(cfg: &AppConfig, seed: u64, a: EvalArgs) -> Result<i32> {
    let net = load_checkpoint_file(&a.checkpoint)?;
    let ext = cfg.hand_eye()?;
    let planner = PlannerConfig {
        mode: a.mode,
        ..Default::default()
    };
    let sweep = SweepConfig {
        angles: a.pitch.clone(),
        trials: a.trials,
        seed,
        scene: SceneConfig {
            size: net.config().input_size,
            ..SceneConfig::default()
        },
        noise: a.noise.unwrap_or(cfg.noise),
        rgg_runs: a.rgg_runs,
        gripper_max: cfg.gripper_max,
    };
    let rows = pitch_sweep(&sweep, &mut |obs| plan_with_network(&net, obs, &ext, &planner))?;
    fs::write(&a.out, format_report(&rows, true))?;
    if let Some(dir) = &a.heatmaps {
        fs::create_dir_all(dir)?;
        for &angle in &a.pitch {
            let s = crate::dataset::synth_scene(crate::dataset::scene_seed(seed, 0), &sweep.scene_at(angle))?;
            let pred = net.predict(&NetInput::from_observation(&s.observation)?)?;
            let g = extract_grasp(&pred, &s.observation)?.grasp;
            render_heatmap(&pred.maps.quality, &s.observation.rgb, Some(&g), dir.join(format!("pitch_{angle}_q.png")))?;
        }
    }
    for r in &rows {
        println!(
            "angle={} sr={:.1}% rgr={:.1}% pt_mean={:.2}ms",
            r.angle_deg, r.sr_pct, r.rgr_pct, r.pt_mean_ms
        );
    }
    Ok(0)
}

fn gradcheck(seed: u64, a: GradcheckArgs) -> Result<i32> {
    let gc = GradCheckConfig {
        size: a.size,
        base_channels: a.base,
        per_class: a.per_class,
        per_layer: a.per_layer,
        seed,
        ..Default::default()
    };
    let t = Instant::now();
    let report = gradient_check(&gc)?;
    for c in &report.classes {
        println!("group={} mode={:?} checked={} max_rel_error={:.3e}", c.group.name(), c.mode, c.checked, c.max_rel_error);
    }
    println!(
        "max_rel_error={:.3e} checked={} skipped={} seconds={:.2}",
        report.max_rel_error,
        report.checked,
        report.skipped,
        t.elapsed().as_secs_f64()
    );
    Ok(if report.max_rel_error < GRADCHECK_TOLERANCE { 0 } else { 1 })
}

fn bench(cfg: &AppConfig, seed: u64, a: BenchArgs) -> Result<i32> {
    let size = a.size.unwrap_or(cfg.net.input_size);
    if a.count == 0 || a.repeats == 0 {
        return Err(Error::InvalidArgument("count and repeats must be positive".into()));
    }
    let levels = NetConfig::levels_for(size)
        .ok_or_else(|| Error::InvalidArgument(format!("size {size} is not divisible by 4")))?;
    let net = NetworkParams::build(NetConfig::new(size, levels.min(cfg.net.depth_levels), cfg.net.base_channels, seed)?)?;
    let scene = SceneConfig {
        size,
        ..SceneConfig::default()
    };
    let samples = synth_dataset(a.count, seed, &scene)?;
    let ext = cfg.hand_eye()?;
    let planner = PlannerConfig::default();
    let mut times: [Vec<f64>; 3] = Default::default();
    for _ in 0..a.repeats {
        for s in &samples {
            let t = Instant::now();
            label_ground_truth(&s.mask)?;
            times[0].push(t.elapsed().as_secs_f64());
            let input = NetInput::from_observation(&s.observation)?;
            let t = Instant::now();
            net.predict(&input)?;
            times[1].push(t.elapsed().as_secs_f64());
            let t = Instant::now();
            plan_with_network(&net, &s.observation, &ext, &planner)?;
            times[2].push(t.elapsed().as_secs_f64());
        }
    }
    println!("size={size} base_channels={} params={} samples={}", cfg.net.base_channels, net.param_count(), times[0].len());
    println!("{:<10}{:>12}{:>12}", "stage", "mean_ms", "p95_ms");
    for (name, ts) in ["label", "forward", "plan"].iter().zip(times.iter_mut()) {
        let mean = ts.iter().sum::<f64>() / ts.len() as f64;
        ts.sort_by(f64::total_cmp);
        println!("{:<10}{:>12.3}{:>12.3}", name, 1e3 * mean, 1e3 * percentile_nearest_rank(ts, 95.0));
    }
    Ok(0)
}
