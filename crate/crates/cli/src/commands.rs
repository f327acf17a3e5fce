use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use selfaware_core::eval::{bands, percentile};
use selfaware_core::fusion::{self, Confusion, FusionConfig, FusionRule};
use selfaware_core::io;
use selfaware_core::mjpf::{self, MjpfConfig};
use selfaware_core::pipeline::{train_shared_level, TrainConfig};
use selfaware_core::scenario::{self, ScenarioParams};
use selfaware_core::seeds::{derive_seed, STREAM_MJPF, STREAM_SCENARIO, STREAM_SOM};
use selfaware_core::som::{SomConfig, SomMetric};
use selfaware_core::unmotivated::NoiseConfig;
use selfaware_core::vocabulary::{Vocabulary, DEFAULT_SMOOTHING};
use selfaware_core::WeightedMetric;

use crate::config::{pick, ConfigFile};
use crate::{Cli, CliError, Command, ScenarioKind};

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Args)]
pub struct GenArgs {
    scenario: ScenarioKind,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    laps: Option<usize>,
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    height: Option<f64>,
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    corner_radius: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// U-turn position as a fraction of the last lap.
    #[arg(long)]
    trigger: Option<f64>,
    /// Stop position as a fraction of the last lap.
    #[arg(long)]
    stop_fraction: Option<f64>,
    /// Seconds spent standing still.
    #[arg(long)]
    stop_duration: Option<f64>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long)]
    q_position: Option<f64>,
    #[arg(long)]
    q_velocity: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Normal training trajectories (`k,t,x,y` with optional `label`).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr0: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    /// Velocity weight of the clustering metric.
    #[arg(long)]
    alpha: Option<f64>,
    /// Position weight of the clustering metric.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    smoothing: Option<f64>,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    input: PathBuf,
    #[arg(short, long)]
    model: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    /// Optional per-step diagnostics CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    resample_threshold: Option<f64>,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    sl: PathBuf,
    pl: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    /// JSON summary path; printed to stdout when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Labelled trajectory supplying ground truth for precision and recall.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    sl_threshold: Option<f64>,
    #[arg(long)]
    pl_threshold: Option<f64>,
    /// `and` or `or`.
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    max_lag: Option<usize>,
    /// Change-point matching window in samples.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(required = true)]
    series: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Shared-level series from a normal validation run.
    #[arg(long)]
    sl: PathBuf,
    /// Private-layer series from a normal validation run.
    #[arg(long)]
    pl: Option<PathBuf>,
    #[arg(long, default_value_t = 0.99)]
    quantile: f64,
    /// Write the thresholds as a config file instead of printing them.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    let seed = pick(cli.seed, file.seed, 0);
    match cli.command {
        Command::Gen(a) => gen(a, &file, seed),
        Command::TrainSl(a) => train(a, &file, seed),
        Command::RunSl(a) => run(a, &file, seed),
        Command::Fuse(a) => fuse(a, &file),
        Command::ExportPlots(a) => export(a),
        Command::CalibrateThresholds(a) => calibrate(a),
    }
}

fn noise(a: &NoiseArgs, f: &ConfigFile) -> Result<NoiseConfig> {
    let d = NoiseConfig::default();
    Ok(NoiseConfig::diagonal(
        pick(a.q_position, f.q_position, d.q[(0, 0)]),
        pick(a.q_velocity, f.q_velocity, d.q[(2, 2)]),
        pick(a.r, f.r, d.r[(0, 0)]),
    )?)
}

fn gen(a: GenArgs, f: &ConfigFile, seed: u64) -> Result<()> {
    let d = ScenarioParams::default();
    let p = ScenarioParams {
        width: pick(a.width, f.width, d.width),
        height: pick(a.height, f.height, d.height),
        speed: pick(a.speed, f.speed, d.speed),
        dt: pick(a.dt, f.dt, d.dt),
        laps: pick(a.laps, f.laps, d.laps),
        corner_radius: pick(a.corner_radius, f.corner_radius, d.corner_radius),
        noise_sigma: pick(a.noise_sigma, f.noise_sigma, d.noise_sigma),
        seed: derive_seed(seed, STREAM_SCENARIO),
    };
    let lt = match a.scenario {
        ScenarioKind::Perimeter => scenario::generate_perimeter(&p)?,
        ScenarioKind::Uturn => scenario::generate_uturn(&p, pick(a.trigger, f.trigger, 0.3))?,
        ScenarioKind::Stop => scenario::generate_stop(
            &p,
            pick(a.stop_fraction, f.stop_fraction, 0.3),
            pick(a.stop_duration, f.stop_duration, 5.0),
        )?,
    };
    io::save_labeled(&a.out, &lt)?;
    Ok(())
}

fn train(a: TrainArgs, f: &ConfigFile, seed: u64) -> Result<()> {
    let d = SomConfig::default();
    let dm = WeightedMetric::default();
    let metric = WeightedMetric::new(pick(a.beta, f.beta, dm.beta), pick(a.alpha, f.alpha, dm.alpha))?;
    let cfg = TrainConfig {
        som: SomConfig {
            rows: pick(a.rows, f.rows, d.rows),
            cols: pick(a.cols, f.cols, d.cols),
            epochs: pick(a.epochs, f.epochs, d.epochs),
            lr0: pick(a.lr0, f.lr0, d.lr0),
            sigma0: pick(a.sigma0, f.sigma0, d.sigma0),
            seed: derive_seed(seed, STREAM_SOM),
            metric: SomMetric::Weighted(metric),
        },
        noise: noise(&a.noise, f)?,
        smoothing: pick(a.smoothing, f.smoothing, DEFAULT_SMOOTHING),
    };
    let trajectories = a
        .inputs
        .iter()
        .map(|p| io::load_trajectory(p))
        .collect::<selfaware_core::Result<Vec<_>>>()?;
    let model = train_shared_level(&trajectories, &cfg)?;
    model.vocabulary.save_json(&a.out)?;
    println!("quantization_error = {}", model.quantization_error);
    println!("superstates = {}", model.vocabulary.len());
    Ok(())
}

fn run(a: RunArgs, f: &ConfigFile, seed: u64) -> Result<()> {
    let d = MjpfConfig::default();
    let cfg = MjpfConfig {
        n_particles: pick(a.particles, f.particles, d.n_particles),
        noise: noise(&a.noise, f)?,
        resample_threshold: pick(a.resample_threshold, f.resample_threshold, d.resample_threshold),
        seed: derive_seed(seed, STREAM_MJPF),
    };
    let vocab = Vocabulary::load_json(&a.model)
        .map_err(|e| CliError::Input(format!("cannot load model {}: {e}", a.model.display())))?;
    let traj = io::load_trajectory(&a.input)?;
    let out = mjpf::run(&vocab, &cfg, &traj)?;
    io::save_series(&a.out, &out.series)?;
    if let Some(path) = &a.log {
        io::save_step_log(path, &out.steps)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct FuseSummary {
    lag: i64,
    changepoint_correlation: f64,
    precision: Option<f64>,
    recall: Option<f64>,
}

fn fuse(a: FuseArgs, f: &ConfigFile) -> Result<()> {
    let d = FusionConfig::default();
    let rule = match a.rule.as_deref().or(f.rule.as_deref()) {
        Some(r) => r.parse::<FusionRule>()?,
        None => d.rule,
    };
    let cfg = FusionConfig {
        sl_threshold: pick(a.sl_threshold, f.sl_threshold, d.sl_threshold),
        pl_threshold: pick(a.pl_threshold, f.pl_threshold, d.pl_threshold),
        rule,
        max_lag: pick(a.max_lag, f.max_lag, d.max_lag),
    };
    let window = pick(a.window, f.window, 5);
    let sl = io::load_series(&a.sl)?;
    let pl = io::load_series(&a.pl)?;
    let (joint, lag) = fusion::align(&sl, &pl, &cfg)?;
    let flags = fusion::joint_verdict(&joint, &cfg);
    io::save_joint(&a.out, &joint, &flags)?;

    let (precision, recall) = match &a.labels {
        Some(path) => {
            let lt = io::load_labeled(path)?;
            let truth_at: HashMap<u64, bool> = lt
                .trajectory
                .samples()
                .iter()
                .zip(lt.abnormal_mask())
                .map(|(o, t)| (o.k, t))
                .collect();
            let truth = joint
                .entries()
                .iter()
                .map(|e| {
                    truth_at.get(&e.k).copied().ok_or_else(|| {
                        CliError::Input(format!("no ground-truth label for k={}", e.k))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let c = Confusion::from_flags(&flags, &truth)?;
            (Some(c.precision()), Some(c.recall()))
        }
        None => (None, None),
    };
    let summary = FuseSummary {
        lag,
        changepoint_correlation: fusion::changepoint_correlation(&joint, window)?,
        precision,
        recall,
    };
    let text = serde_json::to_string_pretty(&summary).map_err(selfaware_core::Error::from)?;
    match &a.summary {
        Some(path) => fs::write(path, text + "\n").map_err(selfaware_core::Error::from)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    fs::create_dir_all(&a.out_dir).map_err(selfaware_core::Error::from)?;
    for path in &a.series {
        let series = io::load_series(path)?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CliError::Input(format!("cannot name outputs for {}", path.display())))?;
        write_tsv(&a.out_dir.join(format!("{stem}.signal.tsv")), "k\tscore", |w| {
            for e in series.entries() {
                writeln!(w, "{}\t{}", e.k, e.score)?;
            }
            Ok(())
        })?;
        let points: Vec<(u64, i64)> = series
            .entries()
            .iter()
            .map(|e| (e.k, e.superstate.to_wire()))
            .collect();
        write_tsv(&a.out_dir.join(format!("{stem}.bands.tsv")), "k_start\tk_end\tlabel", |w| {
            for b in bands(&points) {
                writeln!(w, "{}\t{}\t{}", b.k_start, b.k_end, b.label)?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn write_tsv(
    path: &Path,
    header: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(selfaware_core::Error::from)?);
    writeln!(w, "{header}")
        .and_then(|_| body(&mut w))
        .and_then(|_| w.flush())
        .map_err(selfaware_core::Error::from)?;
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let mut text = String::new();
    let sl = io::load_series(&a.sl)?;
    text += &format!("sl_threshold = {}\n", percentile(&sl.scores(), a.quantile)?);
    if let Some(path) = &a.pl {
        let pl = io::load_series(path)?;
        text += &format!("pl_threshold = {}\n", percentile(&pl.scores(), a.quantile)?);
    }
    match &a.out {
        Some(path) => fs::write(path, text).map_err(selfaware_core::Error::from)?,
        None => print!("{text}"),
    }
    Ok(())
}
