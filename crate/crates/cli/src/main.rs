use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use soar_core::glider::{GRAVITY, SEA_LEVEL_DENSITY};
use soar_core::polar_fit::{compute_k, fit_polar, read_samples};
use soar_core::sim::{radius_sweep, run, Scenario, SweepConfig};

#[derive(Parser)]
#[command(name = "soar", version, about = "Thermal soaring controller simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its telemetry log.
    Run(RunArgs),
    /// Climb rate versus loiter radius for a range of thermal sizes.
    Sweep(SweepArgs),
    /// Fit drag-polar coefficients to glide samples.
    FitPolar(FitArgs),
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Telemetry CSV output.
    #[arg(long)]
    log: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the metrics JSON here.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [10.0, 20.0, 30.0, 50.0, 80.0, 100.0])]
    thermal_radii: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [15.0, 30.0, 60.0])]
    loiter_radii: Vec<f64>,
    #[arg(long, default_value_t = 2.5)]
    strength: f64,
    #[arg(long, default_value_t = 9.0)]
    airspeed: f64,
    /// Climb-rate table (CSV).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with columns airspeed,sink[,bank] (bank in radians).
    samples: PathBuf,
    /// Polar k directly; otherwise derived from --mass and --wing-area.
    #[arg(long, conflicts_with_all = ["mass", "wing_area"])]
    k: Option<f64>,
    /// Aircraft mass, kg.
    #[arg(long, requires = "wing_area")]
    mass: Option<f64>,
    /// Wing area, m².
    #[arg(long, requires = "mass")]
    wing_area: Option<f64>,
    /// Air density, kg/m³.
    #[arg(long, default_value_t = SEA_LEVEL_DENSITY)]
    rho: f64,
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut scenario = Scenario::load(&args.scenario)
        .with_context(|| format!("loading {}", args.scenario.display()))?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let output = run(&scenario)?;
    let mut log = BufWriter::new(
        File::create(&args.log).with_context(|| format!("creating {}", args.log.display()))?,
    );
    log.write_all(output.telemetry_csv().as_bytes())?;
    log.flush()?;
    info!("{} telemetry rows written to {}", output.telemetry.len(), args.log.display());

    let json = serde_json::to_string_pretty(&output.metrics)?;
    writeln!(io::stdout().lock(), "{json}")?;
    if let Some(path) = args.metrics {
        std::fs::write(&path, format!("{json}\n"))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let cfg = SweepConfig {
        strength: args.strength,
        thermal_radii: args.thermal_radii,
        loiter_radii: args.loiter_radii,
        airspeed: args.airspeed,
        ..SweepConfig::default()
    };
    let result = radius_sweep(&cfg)?;
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    result.write_csv(BufWriter::new(file))?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    for &rl in &cfg.loiter_radii {
        writeln!(out, "loiter {rl:>6.1} m: mean climb {:+.3} m/s", result.mean_climb(rl))?;
    }
    for c in &result.optimal {
        writeln!(
            out,
            "thermal {:>6.1} m: best radius {:>6.1} m, climb {:+.3} m/s",
            c.thermal_radius, c.loiter_radius, c.climb_rate
        )?;
    }
    Ok(())
}

fn cmd_fit_polar(args: FitArgs) -> Result<()> {
    let k = match (args.k, args.mass, args.wing_area) {
        (Some(k), _, _) => k,
        (None, Some(m), Some(a)) => compute_k(m, a, args.rho, GRAVITY)?,
        _ => bail!("either --k or both --mass and --wing-area are required"),
    };
    let samples = read_samples(&args.samples)
        .with_context(|| format!("reading {}", args.samples.display()))?;
    let fit = fit_polar(&samples, k)?;
    if fit.suspect {
        log::warn!("negative coefficient fitted; check the glide data");
    }
    info!("{} samples, rms residual {:.4} m/s", samples.len(), fit.rms_residual);
    let mut out = io::stdout().lock();
    writeln!(out, "SOAR_POLAR_CD0 = {}", fit.c_d0)?;
    writeln!(out, "SOAR_POLAR_B = {}", fit.b)?;
    writeln!(out, "SOAR_POLAR_K = {k}")?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::FitPolar(args) => cmd_fit_polar(args),
    };
    // A closed pipe on stdout (`soar run ... | head`) is not an error.
    match result {
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => Ok(()),
        other => other,
    }
}
