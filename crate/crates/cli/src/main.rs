use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use vertisim::charging::{write_charge_curve, ChargerSpec};
use vertisim::energy::{mission_energy, write_energy_table, AircraftParams, FlightProfile};
use vertisim::par::ExecutionMode;
use vertisim::scenario::{self, ScenarioConfig, SweepSpec};

#[derive(Parser)]
#[command(name = "vertisim", version, about = "eVTOL vertiport network simulator and planners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate every combination of fleet size, distance and seed.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        fleet: Vec<u32>,
        /// Leg distances in miles; the scenario's own when omitted.
        #[arg(long, value_delimiter = ',')]
        distance: Vec<f64>,
        /// Number of seeds, counting up from the scenario seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
        /// Also write each cell's run outputs into its own directory.
        #[arg(long)]
        cells: bool,
        #[arg(long)]
        sequential: bool,
    },
    /// Closed-form capacity, fleet and pad estimates.
    Plan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        csv: bool,
    },
    /// Per-phase energy for one mission.
    EnergyTable {
        #[arg(long)]
        distance: f64,
        #[arg(long, default_value_t = 4)]
        pax: u32,
        /// Takes aircraft, profile and battery from a scenario file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Charging curve from empty to the charge cap.
    ChargeCurve {
        #[arg(long, default_value_t = 5.0)]
        step: f64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn models(config: Option<&Path>) -> Result<(AircraftParams, FlightProfile, ChargerSpec, f64)> {
    Ok(match config {
        Some(path) => {
            let c = load(path)?;
            (c.aircraft, c.profile, c.charger, c.battery_kwh)
        }
        None => (AircraftParams::default(), FlightProfile::default(), ChargerSpec::default(), 160.0),
    })
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut c = load(&config)?;
            if let Some(seed) = seed {
                c.seed = seed;
            }
            let result = scenario::run(&c)?;
            scenario::write_run(&c, &result, &out)?;
            let s = &result.summary;
            println!(
                "{} passengers, {} flights ({} repositioning), mean delay {:.2} min; outputs in {}",
                s.delay.passengers,
                s.flights,
                s.repositioning_flights,
                s.delay.mean_min,
                out.display()
            );
        }
        Command::Sweep { config, fleet, distance, seeds, out, cells, sequential } => {
            if seeds == 0 {
                bail!("--seeds must be at least 1");
            }
            let c = load(&config)?;
            c.validate()?;
            let spec =
                SweepSpec { fleets: fleet, distances_mi: distance, seeds: (0..seeds).map(|i| c.seed + i).collect() };
            let mode = if sequential { ExecutionMode::Sequential } else { ExecutionMode::Parallel };
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let rows = scenario::sweep(&c, &spec, mode, cells.then_some(out.as_path()));
            let path = out.join("sweep.csv");
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            scenario::write_sweep_csv(&rows, io::BufWriter::new(file))?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            println!("{} cells, {failed} failed; results in {}", rows.len(), path.display());
            if failed > 0 {
                bail!("{failed} sweep cells failed; see the status column");
            }
        }
        Command::Plan { config, csv } => {
            let report = scenario::plan(&load(&config)?)?;
            let stdout = io::stdout().lock();
            if csv {
                scenario::write_plan_csv(&report, stdout)?;
            } else {
                scenario::write_plan_text(&report, stdout)?;
            }
        }
        Command::EnergyTable { distance, pax, config } => {
            let (aircraft, profile, _, battery) = models(config.as_deref())?;
            let mission = mission_energy(&aircraft, &profile, distance, pax)?;
            write_energy_table(&mission, io::stdout().lock())?;
            eprintln!("total {:.3} kWh, {:.2}% of {battery} kWh", mission.total_kwh, mission.soc_drop(battery));
        }
        Command::ChargeCurve { step, config } => {
            if !(step > 0.0 && step.is_finite()) {
                bail!("--step must be positive");
            }
            let (_, _, charger, battery) = models(config.as_deref())?;
            write_charge_curve(&charger.calibrate(battery)?, step, io::stdout().lock())?;
        }
    }
    io::stdout().flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VERTISIM_LOG", "warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
