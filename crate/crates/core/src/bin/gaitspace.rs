use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gaitspace::config::{Config, ConfigError};
use gaitspace::models::{ModelBundle, ModelError};
use gaitspace::oracle::{
    generate_corpus, plan_corpus, read_dataset, write_dataset, CorpusOptions, GaitKind, OracleError, TerrainMode,
};
use gaitspace::runtime::{
    joint_rmse, latent_slice_map, replay_episode, rollout, swing_metrics, write_log, Controller, GaitCommand,
    LatentMapSpec, RolloutOptions, RuntimeError, Scenario, SwingMetrics,
};
use gaitspace::terrain::{HeightMap, TerrainError};
use gaitspace::training::{
    evaluate_planner, evaluate_vae, train_planner, train_vae, HeldoutMetrics, PlannerLossBreakdown, TrainError,
    TrainingSet,
};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Terrain(#[from] TerrainError),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Oracle(_) => "oracle",
            CliError::Train(_) => "train",
            CliError::Model(_) => "model",
            CliError::Runtime(_) => "runtime",
            CliError::Terrain(_) => "terrain",
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Quadruped gait latent-space toolkit: expert data, training, evaluation and closed-loop control.
#[derive(Debug, Parser)]
#[command(name = "gaitspace", version)]
struct Cli {
    /// TOML config with [oracle], [model], [training] and [runtime] sections
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an expert episode dataset (NDJSON)
    GenData(GenDataArgs),
    /// Train the VAE or the planner
    #[command(subcommand)]
    Train(TrainCommand),
    /// Report contact accuracy, tracking RMSE, swing metrics and planner MSE
    Eval(EvalArgs),
    /// Run a closed-loop scenario and write the tick log
    Rollout(RolloutArgs),
    /// Export latent-slice rasters over a list of gait parameters
    LatentMap(LatentMapArgs),
    /// Run the 400 Hz loop and stream snapshots over a websocket
    Serve(ServeArgs),
    /// Print the effective config as TOML
    ShowConfig,
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// trot, crawl, pace or all
    #[arg(long, default_value = "all")]
    gait: String,
    /// mixed (flat and step episodes), or a terrain for every episode
    #[arg(long, default_value = "mixed")]
    terrain: String,
    /// Minutes of data per gait
    #[arg(long, default_value_t = 5.0)]
    minutes: f64,
    #[arg(long, default_value = "data/corpus.ndjson")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum TrainCommand {
    /// Train encoders, decoder and contact head; select planning dims
    Vae {
        #[arg(long, default_value = "data/corpus.ndjson")]
        dataset: PathBuf,
        /// Bundle directory
        #[arg(long, default_value = "bundle")]
        out: PathBuf,
    },
    /// Train the radius planner on top of a trained bundle
    Planner {
        #[arg(long, default_value = "bundle")]
        bundle: PathBuf,
        #[arg(long, default_value = "data/corpus.ndjson")]
        dataset: PathBuf,
        /// Output bundle directory (defaults to --bundle)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, default_value = "data/corpus.ndjson")]
    dataset: PathBuf,
    /// Bundle to evaluate; without it only the oracle replay is measured
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long, default_value = "eval.json")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RolloutArgs {
    #[arg(long, default_value = "bundle")]
    bundle: PathBuf,
    /// flat, step:h, transition or a schedule JSON file
    #[arg(long, default_value = "flat")]
    scenario: String,
    /// Override the scenario duration (s)
    #[arg(long)]
    duration: Option<f64>,
    /// Tick log (NDJSON); the timing report goes next to it
    #[arg(long, default_value = "rollout.ndjson")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LatentMapArgs {
    #[arg(long, default_value = "bundle")]
    bundle: PathBuf,
    /// Comma-separated gait parameters or names
    #[arg(long, default_value = "1,0,-1")]
    gait: String,
    /// Half-width of the planning-dim square
    #[arg(long, default_value_t = 3.0)]
    extent: f64,
    #[arg(long, default_value_t = 41)]
    resolution: usize,
    /// Output directory
    #[arg(long, default_value = "latent-maps")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "bundle")]
    bundle: PathBuf,
    #[arg(long, default_value_t = 8765)]
    port: u16,
    #[arg(long, default_value_t = 20.0)]
    snapshot_hz: f64,
    #[arg(long, default_value = "flat")]
    terrain: String,
    /// Initial gait parameter or name
    #[arg(long, default_value = "trot")]
    gait: String,
    /// Stop after this many seconds
    #[arg(long)]
    duration: Option<f64>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

fn parse_gait_value(s: &str) -> Result<f64> {
    match s.trim().parse::<GaitKind>() {
        Ok(k) => Ok(k.label()),
        Err(_) => s
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|g| g.is_finite() && (-1.0..=1.0).contains(g))
            .ok_or_else(|| CliError::Usage(format!("gait '{s}' is neither a gait name nor a number in [-1, 1]"))),
    }
}

fn load_set(cfg: &Config, dataset: &Path, model: gaitspace::models::ModelConfig) -> Result<TrainingSet> {
    if !dataset.exists() {
        return Err(CliError::Io {
            path: dataset.display().to_string(),
            source: std::io::ErrorKind::NotFound.into(),
        });
    }
    let episodes = read_dataset(dataset)?;
    let t = &cfg.training;
    Ok(TrainingSet::build(&episodes, model, &cfg.oracle, t.window_stride, t.heldout_every)?)
}

fn gen_data(cfg: &Config, seed: u64, a: &GenDataArgs) -> Result<()> {
    let gaits = if a.gait == "all" {
        GaitKind::ALL.to_vec()
    } else {
        a.gait.split(',').map(|s| s.trim().parse()).collect::<std::result::Result<Vec<GaitKind>, _>>()?
    };
    if !(a.minutes > 0.0) {
        return Err(CliError::Usage("--minutes must be positive".into()));
    }
    let opts = CorpusOptions {
        gaits,
        minutes: a.minutes,
        terrain: TerrainMode::parse(&a.terrain),
        seed,
    };
    let episodes = generate_corpus(&plan_corpus(&opts, &cfg.oracle), &cfg.oracle)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let n = write_dataset(&a.out, &episodes)?;
    let frames: usize = episodes.iter().map(|e| e.len()).sum();
    println!("wrote {n} episodes ({frames} frames) to {}", a.out.display());
    Ok(())
}

fn train(cfg: &Config, seed: u64, cmd: &TrainCommand) -> Result<()> {
    match cmd {
        TrainCommand::Vae { dataset, out } => {
            let set = load_set(cfg, dataset, cfg.model)?;
            println!("{} training windows, {} held out", set.train.len(), set.heldout.len());
            let (bundle, report) = train_vae(&set, &cfg.training, &cfg.oracle, seed, &cfg.hash(), |e| {
                println!(
                    "epoch {:3} step {:6}  mse {:.4}  kl {:8.3}  bce {:.4}  terrain {:.4}  beta {:.3e}",
                    e.epoch, e.step, e.mse, e.kl, e.bce, e.terrain_mse, e.beta
                )
            })?;
            bundle.save(out)?;
            write_json(&out.join("vae_report.json"), &report)?;
            println!("planning dims {:?}", report.planning_dims);
            if let Some(h) = &report.heldout {
                println!("held-out contact accuracy {:.4}, recon mse {:.4}", h.contact_accuracy, h.recon_mse);
            }
            println!("bundle written to {}", out.display());
        }
        TrainCommand::Planner { bundle, dataset, out } => {
            let mut b = ModelBundle::load(bundle)?;
            let set = load_set(cfg, dataset, *b.config())?;
            let (planner, report) = train_planner(&b, &set, &cfg.training, seed, |step, mse, ce| {
                println!("step {step:6}  radius mse {mse:.4}  cross-entropy {ce:.4}")
            })?;
            b.planner = Some(planner);
            let out = out.as_ref().unwrap_or(bundle);
            b.save(out)?;
            write_json(&out.join("planner_report.json"), &report)?;
            if let Some(m) = report.heldout_radius_mse {
                println!("held-out radius mse {m:.4}");
            }
            println!("bundle written to {}", out.display());
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ReplayReport {
    episodes: usize,
    window_rmse_max: f64,
    window_rmse_mean: f64,
    max_slip: f64,
    swings: SwingMetrics,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    dataset: String,
    oracle_replay: ReplayReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    heldout: Option<HeldoutMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    planner: Option<PlannerLossBreakdown>,
}

fn eval(cfg: &Config, a: &EvalArgs) -> Result<()> {
    let episodes = read_dataset(&a.dataset)?;
    let window = (cfg.runtime.rmse_window * cfg.oracle.rate_hz).round() as usize;
    let mut maps: BTreeMap<String, HeightMap> = BTreeMap::new();
    let (mut rmse, mut slip) = (Vec::new(), 0.0f64);
    let (mut feet, mut contacts) = (Vec::new(), Vec::new());
    for ep in &episodes {
        if !maps.contains_key(&ep.header.terrain) {
            maps.insert(ep.header.terrain.clone(), HeightMap::resolve(&ep.header.terrain)?);
        }
        let r = replay_episode(ep, &maps[&ep.header.terrain], &cfg.oracle, cfg.runtime.tracker);
        if let Ok(w) = joint_rmse(&r.targets, &r.executed, window) {
            rmse.extend(w);
        }
        slip = slip.max(r.max_slip);
        if ep.header.terrain == "flat" {
            feet.extend(r.feet);
            contacts.extend(r.contacts);
        }
    }
    if rmse.is_empty() {
        return Err(CliError::Usage(format!("no episode spans a {} s RMSE window", cfg.runtime.rmse_window)));
    }
    let swings = swing_metrics(&feet, &contacts, 2)?;
    let oracle_replay = ReplayReport {
        episodes: episodes.len(),
        window_rmse_max: rmse.iter().copied().fold(0.0, f64::max),
        window_rmse_mean: rmse.iter().sum::<f64>() / rmse.len() as f64,
        max_slip: slip,
        swings,
    };
    println!(
        "oracle replay: {} episodes, window RMSE max {:.4} rad (mean {:.4}), max slip {:.2e} m, flat swing apex {:.4} m length {:.4} m",
        oracle_replay.episodes,
        oracle_replay.window_rmse_max,
        oracle_replay.window_rmse_mean,
        oracle_replay.max_slip,
        oracle_replay.swings.mean_apex,
        oracle_replay.swings.mean_length
    );

    let (mut heldout, mut planner) = (None, None);
    if let Some(path) = &a.bundle {
        let bundle = ModelBundle::load(path)?;
        let t = &cfg.training;
        let set = TrainingSet::build(&episodes, *bundle.config(), &cfg.oracle, t.window_stride, t.heldout_every)?;
        let windows = if set.heldout.is_empty() { &set.train } else { &set.heldout };
        let h = evaluate_vae(&bundle.vae, &bundle.terrain, &set, windows)?;
        println!(
            "contact accuracy {:.4} over {} windows, recon mse {:.4}",
            h.contact_accuracy, h.windows, h.recon_mse
        );
        if bundle.planner.is_some() {
            planner = evaluate_planner(&bundle, &set, windows, t.planner_gait)?;
            if let Some(p) = &planner {
                println!("planner radius mse {:.4}, cross-entropy {:.4}", p.mse, p.cross_entropy);
            }
        }
        heldout = Some(h);
    }
    write_json(
        &a.out,
        &EvalReport {
            dataset: a.dataset.display().to_string(),
            oracle_replay,
            heldout,
            planner,
        },
    )
}

fn run_rollout(cfg: &Config, seed: u64, a: &RolloutArgs) -> Result<()> {
    let bundle = ModelBundle::load(&a.bundle)?;
    let scenario = Scenario::parse(&a.scenario)?;
    let opts = RolloutOptions {
        duration: a.duration,
        seed,
        record_latency: true,
        runtime: cfg.runtime.clone(),
    };
    let r = rollout(&bundle, &scenario, &opts)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    write_log(&a.out, &r.header, &r.records)?;
    write_json(&a.out.with_extension("timing.json"), &r.timing)?;
    let t = &r.timing;
    println!(
        "{} ticks of {}: latency mean {:.0} us, p50 {} us, p99 {} us, max {} us, {} over the {} us budget",
        t.ticks,
        r.header.scenario,
        t.mean_us,
        t.p50_us,
        t.p99_us,
        t.max_us,
        t.overruns,
        t.budget_us
    );
    println!("log written to {}", a.out.display());
    match r.error {
        Some(e) => Err(CliError::Runtime(RuntimeError::Stage {
            stage: "rollout",
            message: e,
        })),
        None => Ok(()),
    }
}

fn latent_map(a: &LatentMapArgs) -> Result<()> {
    let bundle = ModelBundle::load(&a.bundle)?;
    let gs = a.gait.split(',').map(parse_gait_value).collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    for g in gs {
        let spec = LatentMapSpec {
            extent: a.extent,
            resolution: a.resolution,
            g,
            a: [0.25, 0.0, 0.0],
            z_g: vec![0.0; bundle.config().latent],
        };
        let map = latent_slice_map(&bundle, &spec)?;
        let path = a.out.join(format!("latent_map_g{g:+.2}.json"));
        map.write(&path)?;
        println!("g {g:+.2}: {}×{} raster written to {}", a.resolution, a.resolution, path.display());
    }
    Ok(())
}

#[cfg(feature = "serve")]
fn run_serve(cfg: &Config, seed: u64, a: &ServeArgs) -> Result<()> {
    use gaitspace::runtime::{serve, ServeOptions};
    let bundle = ModelBundle::load(&a.bundle)?;
    let map = HeightMap::resolve(&a.terrain)?;
    let cmd = GaitCommand::new([0.0; 3], parse_gait_value(&a.gait)?, cfg.model.control_hz);
    let controller = Controller::new(&bundle, map, cfg.runtime.clone(), cmd, seed)?;
    let opts = ServeOptions {
        addr: format!("127.0.0.1:{}", a.port),
        snapshot_hz: a.snapshot_hz,
        max_ticks: a.duration.map(|d| (d * cfg.model.control_hz).round() as u64),
        ..ServeOptions::default()
    };
    let handle = serve(controller, cmd, opts)?;
    println!("serving ws://{} at {} Hz snapshots", handle.addr, a.snapshot_hz);
    let stats = handle.join();
    println!(
        "{} ticks, {} missed, {} snapshots, max step {} us",
        stats.ticks, stats.missed_ticks, stats.snapshots, stats.max_step_us
    );
    match stats.error {
        Some(e) => Err(CliError::Runtime(RuntimeError::Stage {
            stage: "serve",
            message: e,
        })),
        None => Ok(()),
    }
}

#[cfg(not(feature = "serve"))]
fn run_serve(_: &Config, _: u64, _: &ServeArgs) -> Result<()> {
    Err(CliError::Usage("built without the serve feature".into()))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::GenData(a) => gen_data(&cfg, cli.seed, a),
        Command::Train(t) => train(&cfg, cli.seed, t),
        Command::Eval(a) => eval(&cfg, a),
        Command::Rollout(a) => run_rollout(&cfg, cli.seed, a),
        Command::LatentMap(a) => latent_map(a),
        Command::Serve(a) => run_serve(&cfg, cli.seed, a),
        Command::ShowConfig => {
            print!("{}", cfg.to_toml());
            println!("# hash {}", cfg.hash());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
