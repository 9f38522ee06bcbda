use std::collections::BTreeMap;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gm3_core::config::builtin_ids;
use gm3_core::engine::csv::{export_csv, metadata_toml};
use gm3_core::engine::script::{run_script, ControlScript};
use gm3_core::eval::harness::{default_configs, evaluate_modes, Scale};
use gm3_core::eval::{EvalOptions, Mode, ReconstructOptions};
use gm3_core::par::Execution;
use gm3_core::{ModelRegistry, VehicleConfig};
use gm3_server::{Catalog, Hub, SessionConfig, PORT_ENV};

#[derive(Parser)]
#[command(name = "gm3", version, about = "Tire-level micro-mobility vehicle simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML control script and write the log as CSV.
    Simulate(SimulateArgs),
    /// Serve interactive driving sessions over WebSocket.
    Demo(DemoArgs),
    /// Replay annotated trajectories with GM3 and KBM and score them.
    Evaluate(EvaluateArgs),
    /// List the bundled vehicle configs and models.
    List,
}

#[derive(Args)]
struct SimulateArgs {
    /// Control script (TOML).
    #[arg(long)]
    script: PathBuf,
    /// Model id; overrides the script.
    #[arg(long)]
    model: Option<String>,
    /// Bundled vehicle id or config path; overrides the script.
    #[arg(long)]
    vehicle: Option<String>,
    /// Step size in seconds; overrides the script and the vehicle config.
    #[arg(long)]
    dt: Option<f64>,
    /// Output CSV. Metadata goes to `<out>.meta.toml`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DemoArgs {
    /// Default vehicle for new sessions (bundled id or config path).
    #[arg(long, default_value = "cart")]
    vehicle: String,
    /// Default model for new sessions.
    #[arg(long, default_value = "gm3")]
    model: String,
    #[arg(long, env = PORT_ENV, default_value_t = gm3_server::DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// State messages per second.
    #[arg(long, default_value_t = gm3_server::session::DEFAULT_STREAM_RATE)]
    stream_rate: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset root (with `annotations/<scene>/video*/annotations.txt`).
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "deathCircle")]
    scene: String,
    /// Comma-separated modes.
    #[arg(long, value_delimiter = ',', default_value = "biker,skater,cart")]
    modes: Vec<Mode>,
    /// Uniform pixel-to-meter scale, m/px.
    #[arg(long, conflicts_with = "calibration", required_unless_present = "calibration")]
    scale: Option<f64>,
    /// TOML file with per-video scales (`[scales] video0 = ...`).
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Output directory for per_track.csv, summary.csv and table.txt.
    #[arg(long)]
    out: PathBuf,
    /// Replace a mode's vehicle config: `mode=id_or_path`, repeatable.
    #[arg(long = "config", value_parser = parse_mode_config)]
    configs: Vec<(Mode, String)>,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    /// Moving-average window, samples.
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// Tracks with a lower median speed are excluded, m/s.
    #[arg(long, default_value_t = 0.1)]
    min_speed: f64,
    /// Integration substeps per data sample.
    #[arg(long, default_value_t = 6)]
    substeps: usize,
    /// Evaluate tracks on one thread.
    #[arg(long)]
    sequential: bool,
}

fn parse_mode_config(s: &str) -> Result<(Mode, String), String> {
    let (mode, cfg) = s.split_once('=').ok_or_else(|| format!("expected mode=config, got `{s}`"))?;
    Ok((mode.parse()?, cfg.to_string()))
}

/// Resolves a vehicle named in a script: bundled ids first, then paths
/// relative to the script.
fn script_vehicle(name: &str, script: &Path) -> Result<VehicleConfig> {
    if builtin_ids().any(|id| id == name) || Path::new(name).is_absolute() {
        return Ok(VehicleConfig::resolve(name)?);
    }
    let path = script.parent().unwrap_or(Path::new(".")).join(name);
    VehicleConfig::from_path(&path).with_context(|| format!("vehicle `{name}`"))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut script =
        ControlScript::from_path(&args.script).with_context(|| format!("reading {}", args.script.display()))?;
    if let Some(m) = args.model {
        script.model = m;
    }
    if let Some(dt) = args.dt {
        script.dt = Some(dt);
    }
    let vehicle = match &args.vehicle {
        Some(v) => VehicleConfig::resolve(v)?,
        None => script_vehicle(&script.vehicle_kind, &args.script)?,
    };
    let log = run_script(&script, &vehicle, &ModelRegistry::default())?;
    export_csv(&log, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let mut meta = args.out.clone().into_os_string();
    meta.push(".meta.toml");
    std::fs::write(&meta, metadata_toml(&log))?;
    eprintln!(
        "{} rows ({} model, {}) -> {}",
        log.rows.len(),
        log.metadata.model,
        log.metadata.vehicle,
        args.out.display()
    );
    if let Some(fault) = &log.fault {
        bail!("run stopped early: {fault}");
    }
    Ok(())
}

fn demo(args: DemoArgs) -> Result<()> {
    let mut catalog = Catalog::builtin();
    let vehicle_id = if catalog.vehicles.contains_key(&args.vehicle) {
        args.vehicle.clone()
    } else {
        let cfg = VehicleConfig::from_path(&args.vehicle).with_context(|| format!("vehicle `{}`", args.vehicle))?;
        let id = cfg.name.clone();
        catalog.insert(id.clone(), cfg);
        id
    };
    if catalog.registry.get(&args.model).is_err() {
        bail!("unknown model `{}` (available: {})", args.model, catalog.model_ids().join(", "));
    }
    let mut defaults = SessionConfig::new(vehicle_id.clone(), args.model);
    defaults.dt = catalog.vehicles[&vehicle_id].integrator.dt;
    defaults.stream_rate = args.stream_rate;
    defaults.validate()?;
    let hub = Hub::new(catalog, defaults);
    let addr = SocketAddr::new(args.host, args.port);
    eprintln!("serving ws://{addr}/ws");
    tokio::runtime::Runtime::new()?.block_on(gm3_server::run(addr, hub))?;
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let scale = match (args.scale, &args.calibration) {
        (Some(s), _) => Scale::Uniform(s),
        (None, Some(path)) => Scale::from_calibration_file(path)?,
        (None, None) => bail!("--scale or --calibration is required"),
    };
    let mut configs: BTreeMap<Mode, VehicleConfig> = default_configs();
    for (mode, cfg) in &args.configs {
        configs.insert(*mode, VehicleConfig::resolve(cfg).with_context(|| format!("config for {}", mode.as_str()))?);
    }
    let opts = EvalOptions {
        fps: args.fps,
        reconstruct: ReconstructOptions {
            window: args.window,
            min_median_speed: args.min_speed,
            substeps: args.substeps,
        },
        execution: if args.sequential { Execution::Sequential } else { Execution::Parallel },
    };
    let report = evaluate_modes(&args.dataset, &args.scene, &args.modes, &scale, &configs, &opts, Some(&args.out))?;
    print!("{}", report.table());
    for (id, mode, reason) in &report.excluded {
        log::info!("excluded {id} ({}): {reason}", mode.as_str());
    }
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn list() {
    println!("vehicles:");
    for id in builtin_ids() {
        let cfg = VehicleConfig::builtin(id).expect("bundled config");
        println!("  {id:<11} {} wheels, {}", cfg.wheels.len(), cfg.steering_mode.as_str());
    }
    println!("models:");
    for id in ModelRegistry::default().ids() {
        println!("  {id}");
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Demo(a) => demo(a),
        Command::Evaluate(a) => evaluate(a),
        Command::List => {
            list();
            Ok(())
        }
    }
}
