//! Scenario files: parsing, validation, single runs, sweeps and planner reports.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{audit, AuditReport};
use crate::charging::{ChargerModel, ChargerSpec, ChargingError};
use crate::demand::{estimate_departures, generate_arrivals, DemandError, DemandProfile, PassengerRequest};
use crate::energy::{mission_energy, AircraftParams, EnergyError, FlightProfile};
use crate::fleet::{
    simulate, write_flights_csv, write_passengers_csv, PolicyConfig, SimError, SimulationOutput, SimulationSetup,
};
use crate::kernel::SimTime;
use crate::metrics::{summarize, utilization_breakdown, write_utilization_csv, MetricsError, MetricsSummary};
use crate::par::{self, ExecutionMode};
use crate::planning::{self, Binding, CapacityInputs, FleetSizeInputs};
use crate::topology::{CloverGeometry, Network, Position, SiteSpec, TopologyError, FEET_PER_MILE};

/// Bumped whenever summary.json changes shape.
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

pub const OUTPUT_FILES: [&str; 5] = ["flights.csv", "passengers.csv", "events.csv", "utilization.csv", "summary.json"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon_h: f64,
    #[serde(default = "default_battery")]
    pub battery_kwh: f64,
    /// Hourly demand CSV, relative to the scenario file. The bundled
    /// reconstructed profile is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<PathBuf>,
    #[serde(default)]
    pub output: OutputConfig,
    pub network: NetworkConfig,
    pub fleet: FleetConfig,
    #[serde(default)]
    pub aircraft: AircraftParams,
    #[serde(default)]
    pub profile: FlightProfile,
    #[serde(default)]
    pub charger: ChargerSpec,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub planning: PlanningConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_seed() -> u64 {
    1
}

fn default_horizon() -> f64 {
    24.0
}

fn default_battery() -> f64 {
    160.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub record_events: bool,
    /// Count passengers still waiting at the horizon in the mean delay.
    pub include_unserved_delay: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { record_events: true, include_unserved_delay: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default = "default_spacing")]
    pub waypoint_spacing_mi: f64,
    #[serde(default)]
    pub geometry: CloverGeometry,
    pub vertiports: Vec<VertiportConfig>,
    pub legs: Vec<LegConfig>,
}

fn default_spacing() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertiportConfig {
    pub id: String,
    /// Parking pads; defaults to the fleet split evenly across vertiports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pads: Option<u32>,
    #[serde(default = "default_one")]
    pub tlofs: u32,
    /// Chargers; defaults to one per pad.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chargers: Option<u32>,
    /// Site in miles; only used for drawing the layout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_mi: Option<[f64; 2]>,
}

fn default_one() -> u32 {
    1
}

/// An undirected leg; both directions are flown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegConfig {
    pub from: String,
    pub to: String,
    pub distance_mi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetConfig {
    pub size: u32,
    /// Aircraft per vertiport at the start; an even split when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<Vec<u32>>,
    #[serde(default = "default_soc")]
    pub initial_soc: f64,
}

fn default_soc() -> f64 {
    100.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanningConfig {
    pub window_min: f64,
    pub target_departures_per_h: f64,
    /// Pad turnaround for the capacity and fleet planners. When absent it is
    /// disembark, pre-charge, a two-leg charge from the reserve and post-charge.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub turnaround_min: Option<f64>,
}

impl Default for PlanningConfig {
    fn default() -> Self {
        PlanningConfig { window_min: 1440.0, target_departures_per_h: 24.0, turnaround_min: None }
    }
}

/// One invalid field, named by its path in the scenario file.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn bad(errors: &mut Vec<FieldError>, field: &str, message: String) {
    errors.push(FieldError { field: field.to_owned(), message });
}

fn join_fields(errors: &[FieldError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("scenario file does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {}", join_fields(.0))]
    Invalid(Vec<FieldError>),
    #[error("demand: {0}")]
    Demand(#[from] DemandError),
    #[error("network: {0}")]
    Topology(#[from] TopologyError),
    #[error("energy model: {0}")]
    Energy(#[from] EnergyError),
    #[error("charger: {0}")]
    Charging(#[from] ChargingError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("writing outputs: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing outputs: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{count} invariant violations, first [{check}] {message}; see {log}")]
    Audit { count: usize, check: String, message: String, log: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io { path: path.display().to_string(), source }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: PathBuf) -> Result<Self, ScenarioError> {
        let mut config: ScenarioConfig = toml::from_str(text)?;
        config.base_dir = base_dir;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    pub fn demand_path(&self) -> Option<PathBuf> {
        self.demand.as_ref().map(|p| if p.is_absolute() { p.clone() } else { self.base_dir.join(p) })
    }

    pub fn horizon(&self) -> SimTime {
        SimTime::from_hours(self.horizon_h)
    }

    pub fn vertiport_index(&self, id: &str) -> Option<usize> {
        self.network.vertiports.iter().position(|v| v.id == id)
    }

    /// Pads at vertiport `v` after defaults.
    pub fn pads(&self, v: usize) -> u32 {
        let n = self.network.vertiports.len().max(1) as u32;
        self.network.vertiports[v].pads.unwrap_or(self.fleet.size.div_ceil(n).max(1))
    }

    pub fn chargers(&self, v: usize) -> u32 {
        self.network.vertiports[v].chargers.unwrap_or_else(|| self.pads(v))
    }

    /// Starting vertiport per aircraft.
    pub fn placement(&self) -> Vec<usize> {
        let n = self.network.vertiports.len().max(1);
        match &self.fleet.placement {
            Some(counts) => counts.iter().enumerate().flat_map(|(v, &c)| std::iter::repeat_n(v, c as usize)).collect(),
            None => (0..self.fleet.size as usize).map(|i| i * n / self.fleet.size as usize).collect(),
        }
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut errors = Vec::new();
        let positive = |v: f64| v > 0.0 && v.is_finite();

        if !positive(self.horizon_h) {
            bad(&mut errors, "horizon_h", format!("must be positive, got {}", self.horizon_h));
        }
        if !positive(self.battery_kwh) {
            bad(&mut errors, "battery_kwh", format!("must be positive, got {}", self.battery_kwh));
        }
        let net = &self.network;
        if net.vertiports.len() < 2 {
            bad(&mut errors, "network.vertiports", "at least two vertiports are needed".into());
        }
        if !positive(net.waypoint_spacing_mi) {
            bad(&mut errors, "network.waypoint_spacing_mi", "must be positive".into());
        }
        if let Err(e) = net.geometry.validate() {
            bad(&mut errors, "network.geometry", e.to_string());
        }
        for (i, v) in net.vertiports.iter().enumerate() {
            let field = |name: &str| format!("network.vertiports[{i}].{name}");
            if v.id.trim().is_empty() || v.id.contains("->") || v.id.contains(['/', ',']) {
                bad(&mut errors, &field("id"), format!("'{}' is not a usable id", v.id));
            }
            if net.vertiports[..i].iter().any(|o| o.id == v.id) {
                bad(&mut errors, &field("id"), format!("duplicate id '{}'", v.id));
            }
            if v.pads == Some(0) {
                bad(&mut errors, &field("pads"), "must be at least 1".into());
            }
            if v.tlofs == 0 {
                bad(&mut errors, &field("tlofs"), "must be at least 1".into());
            }
            if v.chargers == Some(0) {
                bad(&mut errors, &field("chargers"), "must be at least 1".into());
            }
        }
        for (i, leg) in net.legs.iter().enumerate() {
            let field = |name: &str| format!("network.legs[{i}].{name}");
            for (name, id) in [("from", &leg.from), ("to", &leg.to)] {
                if self.vertiport_index(id).is_none() {
                    bad(&mut errors, &field(name), format!("unknown vertiport '{id}'"));
                }
            }
            if leg.from == leg.to {
                bad(&mut errors, &field("to"), "a leg needs two different vertiports".into());
            }
            if !positive(leg.distance_mi) || leg.distance_mi < net.waypoint_spacing_mi {
                bad(
                    &mut errors,
                    &field("distance_mi"),
                    format!("must be at least the waypoint spacing, got {}", leg.distance_mi),
                );
            }
            let same = |o: &LegConfig| (o.from == leg.from && o.to == leg.to) || (o.from == leg.to && o.to == leg.from);
            if net.legs[..i].iter().any(same) {
                bad(&mut errors, &field("to"), "duplicate leg".into());
            }
        }
        if net.legs.is_empty() {
            bad(&mut errors, "network.legs", "at least one leg is needed".into());
        }
        if self.fleet.size == 0 {
            bad(&mut errors, "fleet.size", "must be at least 1".into());
        }
        if !(self.fleet.initial_soc > self.policy.reserve_soc && self.fleet.initial_soc <= 100.0) {
            bad(&mut errors, "fleet.initial_soc", format!("must lie in ({}, 100]", self.policy.reserve_soc));
        }
        if let Some(counts) = &self.fleet.placement {
            if counts.len() != net.vertiports.len() {
                bad(
                    &mut errors,
                    "fleet.placement",
                    format!("needs {} entries, one per vertiport", net.vertiports.len()),
                );
            } else if counts.iter().sum::<u32>() != self.fleet.size {
                bad(
                    &mut errors,
                    "fleet.placement",
                    format!("places {} aircraft for a fleet of {}", counts.iter().sum::<u32>(), self.fleet.size),
                );
            }
        }
        if errors.is_empty() && net.vertiports.len() >= 2 {
            let placement = self.placement();
            for v in 0..net.vertiports.len() {
                let here = placement.iter().filter(|&&p| p == v).count() as u32;
                if here > self.pads(v) {
                    bad(
                        &mut errors,
                        &format!("network.vertiports[{v}].pads"),
                        format!("{here} aircraft start here but there are only {} pads", self.pads(v)),
                    );
                }
            }
        }
        if let Err(e) = self.aircraft.validate() {
            bad(&mut errors, "aircraft", e.to_string());
        }
        if let Err(e) = self.profile.validate() {
            bad(&mut errors, "profile", e.to_string());
        }
        if positive(self.battery_kwh) {
            if let Err(e) = self.charger.calibrate(self.battery_kwh) {
                bad(&mut errors, "charger", e.to_string());
            }
        }
        if let Err(e) = self.policy.validate() {
            bad(&mut errors, "policy", e);
        }
        if !positive(self.planning.window_min) {
            bad(&mut errors, "planning.window_min", "must be positive".into());
        }
        if !(self.planning.target_departures_per_h >= 0.0 && self.planning.target_departures_per_h.is_finite()) {
            bad(&mut errors, "planning.target_departures_per_h", "must be non-negative".into());
        }
        if self.planning.turnaround_min.is_some_and(|t| !positive(t)) {
            bad(&mut errors, "planning.turnaround_min", "must be positive".into());
        }
        if let Some(path) = self.demand_path() {
            if !path.is_file() {
                bad(&mut errors, "demand", format!("{} does not exist", path.display()));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(errors))
        }
    }

    pub fn demand_profile(&self) -> Result<DemandProfile, ScenarioError> {
        let profile = match self.demand_path() {
            Some(path) => DemandProfile::load(&path)?,
            None => DemandProfile::reconstructed(),
        };
        let mut errors = Vec::new();
        for d in profile.directions() {
            for id in [&d.origin, &d.destination] {
                if self.vertiport_index(id).is_none() {
                    errors.push(FieldError {
                        field: "demand".into(),
                        message: format!("direction {d} names unknown vertiport '{id}'"),
                    });
                }
            }
        }
        if errors.is_empty() {
            Ok(profile)
        } else {
            Err(ScenarioError::Invalid(errors))
        }
    }

    pub fn charger_model(&self) -> Result<ChargerModel, ScenarioError> {
        Ok(self.charger.calibrate(self.battery_kwh)?)
    }

    pub fn build_network(&self) -> Result<Network, ScenarioError> {
        let net = &self.network;
        let span = net.legs.iter().map(|l| l.distance_mi).fold(0.0, f64::max);
        let sites: Vec<SiteSpec> = net
            .vertiports
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let [x, y] = v.position_mi.unwrap_or([i as f64 * span, 0.0]);
                SiteSpec {
                    id: v.id.clone(),
                    site: Position { x_ft: x * FEET_PER_MILE, y_ft: y * FEET_PER_MILE, alt_ft: 0.0 },
                    pads: self.pads(i),
                    tlofs: v.tlofs,
                    chargers: self.chargers(i),
                }
            })
            .collect();
        let legs: Vec<(usize, usize, f64)> = net
            .legs
            .iter()
            .map(|l| {
                (self.vertiport_index(&l.from).unwrap_or(0), self.vertiport_index(&l.to).unwrap_or(0), l.distance_mi)
            })
            .collect();
        Ok(Network::build(&sites, &legs, &net.geometry, net.waypoint_spacing_mi)?)
    }

    pub fn build_setup(&self) -> Result<SimulationSetup, ScenarioError> {
        self.validate()?;
        Ok(SimulationSetup {
            network: self.build_network()?,
            initial_placement: self.placement(),
            aircraft: self.aircraft.clone(),
            profile: self.profile.clone(),
            battery_kwh: self.battery_kwh,
            initial_soc: self.fleet.initial_soc,
            charger: self.charger_model()?,
            policy: self.policy.clone(),
            horizon: self.horizon(),
            record_log: self.output.record_events,
        })
    }

    /// Passenger arrivals for this scenario's seed.
    pub fn arrivals(&self) -> Result<Vec<PassengerRequest>, ScenarioError> {
        let profile = self.demand_profile()?;
        let horizon = self.horizon();
        Ok(generate_arrivals(&profile, self.seed).into_iter().filter(|p| p.arrival < horizon).collect())
    }

    /// A copy with every leg set to `distance_mi` and the fleet resized.
    /// Pads follow the fleet unless fixed in the file.
    pub fn with_cell(&self, fleet: u32, distance_mi: Option<f64>, seed: u64) -> ScenarioConfig {
        let mut c = self.clone();
        c.fleet.size = fleet;
        c.fleet.placement = None;
        c.seed = seed;
        if let Some(d) = distance_mi {
            for leg in &mut c.network.legs {
                leg.distance_mi = d;
            }
            for v in &mut c.network.vertiports {
                v.position_mi = None;
            }
        }
        c
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub output: SimulationOutput,
    pub summary: MetricsSummary,
    pub audit: AuditReport,
}

/// Validates, simulates, summarizes and audits one scenario.
pub fn run(config: &ScenarioConfig) -> Result<RunResult, ScenarioError> {
    let setup = config.build_setup()?;
    let arrivals = config.arrivals()?;
    log::info!("running {} passengers, fleet {}, seed {}", arrivals.len(), config.fleet.size, config.seed);
    let output = simulate(&setup, &arrivals)?;
    let summary = summarize(&output, config.output.include_unserved_delay)?;
    let audit = audit(&output);
    log::debug!("{} events, {} flights", output.events_processed, output.flights.len());
    Ok(RunResult { output, summary, audit })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryFile<'a> {
    pub schema_version: u32,
    pub seed: u64,
    pub fleet_size: u32,
    pub vertiports: &'a [String],
    pub legs: Vec<(String, String, f64)>,
    pub events_processed: u64,
    pub audit_clean: bool,
    pub audit_violations: usize,
    pub metrics: &'a MetricsSummary,
}

fn create(path: &Path) -> Result<io::BufWriter<fs::File>, ScenarioError> {
    Ok(io::BufWriter::new(fs::File::create(path).map_err(io_err(path))?))
}

/// Writes every output file into `dir`. A failed audit still writes the
/// files, then drops a FAILED marker and reports the first violation.
pub fn write_run(config: &ScenarioConfig, result: &RunResult, dir: &Path) -> Result<(), ScenarioError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let marker = dir.join("FAILED");
    if marker.exists() {
        fs::remove_file(&marker).map_err(io_err(&marker))?;
    }
    let out = &result.output;
    let ids = &out.vertiport_ids;
    write_flights_csv(&out.flights, ids, create(&dir.join("flights.csv"))?)?;
    write_passengers_csv(&out.passengers, ids, out.horizon, create(&dir.join("passengers.csv"))?)?;
    out.log.write_csv(create(&dir.join("events.csv"))?)?;
    let utilization = utilization_breakdown(&out.intervals, out.fleet_size, out.horizon)?;
    write_utilization_csv(&utilization, create(&dir.join("utilization.csv"))?)?;
    let summary = SummaryFile {
        schema_version: SUMMARY_SCHEMA_VERSION,
        seed: config.seed,
        fleet_size: config.fleet.size,
        vertiports: ids,
        legs: config.network.legs.iter().map(|l| (l.from.clone(), l.to.clone(), l.distance_mi)).collect(),
        events_processed: out.events_processed,
        audit_clean: result.audit.is_clean(),
        audit_violations: result.audit.violations.len(),
        metrics: &result.summary,
    };
    let path = dir.join("summary.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    w.write_all(b"\n").map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;
    if let Some(first) = result.audit.violations.first() {
        let mut m = create(&marker)?;
        for v in &result.audit.violations {
            writeln!(m, "[{}] {}", v.check, v.message).map_err(io_err(&marker))?;
        }
        return Err(ScenarioError::Audit {
            count: result.audit.violations.len(),
            check: first.check.to_owned(),
            message: first.message.clone(),
            log: dir.join("events.csv").display().to_string(),
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub fleets: Vec<u32>,
    /// Leg distances to try; the file's own distances when empty.
    pub distances_mi: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct SweepCell {
    pub distance_mi: Option<f64>,
    pub fleet: u32,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub distance_mi: f64,
    pub fleet: u32,
    pub seed: u64,
    pub status: String,
    pub error: String,
    pub passengers: usize,
    pub served: usize,
    pub mean_delay_min: f64,
    pub flights: usize,
    pub repositioning_flights: usize,
    pub idle_h: f64,
    pub charge_h: f64,
    pub cruise_h: f64,
    pub holding_h: f64,
    pub other_h: f64,
    pub rpm_asm: f64,
    pub load_factor: f64,
    pub energy_kwh: f64,
    pub audit_violations: usize,
}

impl SweepSpec {
    pub fn cells(&self) -> Vec<SweepCell> {
        let distances: Vec<Option<f64>> = if self.distances_mi.is_empty() {
            vec![None]
        } else {
            self.distances_mi.iter().map(|&d| Some(d)).collect()
        };
        let mut cells = Vec::new();
        for &distance_mi in &distances {
            for &fleet in &self.fleets {
                for &seed in &self.seeds {
                    cells.push(SweepCell { distance_mi, fleet, seed });
                }
            }
        }
        cells
    }
}

impl SweepCell {
    /// Directory name for this cell's outputs.
    pub fn dir_name(&self) -> String {
        match self.distance_mi {
            Some(d) => format!("d{d}_f{}_s{}", self.fleet, self.seed),
            None => format!("f{}_s{}", self.fleet, self.seed),
        }
    }
}

/// Runs the cross product of fleets, distances and seeds. A failing cell is
/// reported in its row and the sweep carries on. With `cell_dirs`, each cell
/// writes its run outputs into its own subdirectory.
pub fn sweep(base: &ScenarioConfig, spec: &SweepSpec, mode: ExecutionMode, cell_dirs: Option<&Path>) -> Vec<SweepRow> {
    let cells = spec.cells();
    par::map(mode, &cells, |cell| {
        let config = base.with_cell(cell.fleet, cell.distance_mi, cell.seed);
        let distance = cell.distance_mi.unwrap_or_else(|| config.network.legs.first().map_or(0.0, |l| l.distance_mi));
        let mut row = SweepRow {
            distance_mi: distance,
            fleet: cell.fleet,
            seed: cell.seed,
            status: "ok".into(),
            error: String::new(),
            passengers: 0,
            served: 0,
            mean_delay_min: 0.0,
            flights: 0,
            repositioning_flights: 0,
            idle_h: 0.0,
            charge_h: 0.0,
            cruise_h: 0.0,
            holding_h: 0.0,
            other_h: 0.0,
            rpm_asm: 0.0,
            load_factor: 0.0,
            energy_kwh: 0.0,
            audit_violations: 0,
        };
        let result = run(&config).and_then(|r| match cell_dirs {
            Some(root) => write_run(&config, &r, &root.join(cell.dir_name())).map(|()| r),
            None => Ok(r),
        });
        match result {
            Ok(r) => {
                let s = &r.summary;
                row.passengers = s.delay.passengers;
                row.served = s.delay.served;
                row.mean_delay_min = s.delay.mean_min;
                row.flights = s.flights;
                row.repositioning_flights = s.repositioning_flights;
                row.idle_h = s.network_hours.idle;
                row.charge_h = s.network_hours.charge;
                row.cruise_h = s.network_hours.cruise;
                row.holding_h = s.network_hours.holding;
                row.other_h = s.network_hours.other;
                row.rpm_asm = s.rpm_asm;
                row.load_factor = s.load_factor;
                row.energy_kwh = s.energy.total_kwh;
                row.audit_violations = r.audit.violations.len();
                if let Some(v) = r.audit.violations.first() {
                    row.status = "audit_failed".into();
                    row.error = format!("[{}] {}", v.check, v.message);
                }
            }
            Err(ScenarioError::Audit { count, check, message, log }) => {
                row.status = "audit_failed".into();
                row.audit_violations = count;
                row.error = format!("[{check}] {message}; see {log}");
            }
            Err(e) => {
                log::warn!("sweep cell fleet {} seed {} failed: {e}", cell.fleet, cell.seed);
                row.status = "error".into();
                row.error = e.to_string();
            }
        }
        row
    })
}

pub fn write_sweep_csv<W: io::Write>(rows: &[SweepRow], writer: W) -> Result<(), csv::Error> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VertiportPlan {
    pub vertiport: String,
    pub pads: u32,
    pub tlofs: u32,
    pub surface_cycles_per_h: f64,
    pub tlof_ops_per_h: f64,
    pub capacity_ops_per_h: f64,
    pub binding: Binding,
    /// Pads needed for the target departure rate; absent when the TLOFs cannot carry it.
    pub pads_for_target: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LegPlan {
    pub origin: String,
    pub destination: String,
    pub distance_mi: f64,
    pub flight_min: f64,
    pub leg_soc_pct: f64,
    pub turnaround_min: f64,
    pub round_trip_min: f64,
    pub expected_departures: u32,
    pub min_fleet: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanReport {
    pub target_departures_per_h: f64,
    pub vertiports: Vec<VertiportPlan>,
    pub legs: Vec<LegPlan>,
    pub min_fleet: u32,
}

/// Closed-form capacity, fleet and pad estimates; no simulation involved.
pub fn plan(config: &ScenarioConfig) -> Result<PlanReport, ScenarioError> {
    config.validate()?;
    let network = config.build_network()?;
    let charger = config.charger_model()?;
    let policy = &config.policy;
    let tlof_s = config.profile.tlof_operation_s();
    let arrivals = config.arrivals()?;
    let departures = estimate_departures(&arrivals, policy.vehicle_capacity, policy.wait_threshold(), config.horizon());
    let seats = config.aircraft.seats;

    let mut legs = Vec::new();
    for leg in &config.network.legs {
        for (from, to) in [(&leg.from, &leg.to), (&leg.to, &leg.from)] {
            let mission = mission_energy(&config.aircraft, &config.profile, leg.distance_mi, seats)?;
            let leg_soc = mission.soc_drop(config.battery_kwh);
            let turnaround = match config.planning.turnaround_min {
                Some(t) => t,
                None => {
                    let target = (policy.reserve_soc + f64::from(policy.charge_target_flights) * leg_soc)
                        .min(charger.max_target_soc);
                    policy.disembark_min
                        + policy.pre_charge_min
                        + charger.charge_duration(policy.reserve_soc, target)?
                        + policy.post_charge_min
                }
            };
            let flight_min = mission.duration_s / 60.0;
            let expected = departures
                .iter()
                .find(|d| &d.direction.origin == from && &d.direction.destination == to)
                .map_or(0, |d| d.departures);
            let back = departures
                .iter()
                .find(|d| &d.direction.origin == to && &d.direction.destination == from)
                .map_or(0, |d| d.departures);
            let fleet = planning::min_fleet_size(&FleetSizeInputs {
                flight_min,
                turnaround_min: turnaround,
                window_min: config.planning.window_min,
                daily_flights: vec![f64::from(expected), f64::from(back)],
            });
            legs.push(LegPlan {
                origin: from.clone(),
                destination: to.clone(),
                distance_mi: leg.distance_mi,
                flight_min,
                leg_soc_pct: leg_soc,
                turnaround_min: turnaround,
                round_trip_min: planning::round_trip_time(flight_min, turnaround),
                expected_departures: expected,
                min_fleet: fleet,
            });
        }
    }

    let turnaround_s = legs.iter().map(|l| l.turnaround_min).fold(0.0, f64::max) * 60.0;
    let mut vertiports = Vec::new();
    for (i, layout) in network.vertiports.iter().enumerate() {
        let taxi_s = network.taxi_length_ft(i)? / policy.taxi_speed_ft_s;
        let inputs = CapacityInputs {
            pads: config.pads(i),
            tlofs: config.network.vertiports[i].tlofs,
            window_s: 3600.0,
            arrival_s: tlof_s,
            departure_s: tlof_s,
            taxi_in_s: taxi_s,
            taxi_out_s: taxi_s,
            turnaround_s,
        };
        let c = planning::vertiport_capacity(&inputs);
        vertiports.push(VertiportPlan {
            vertiport: layout.id.clone(),
            pads: inputs.pads,
            tlofs: inputs.tlofs,
            surface_cycles_per_h: planning::surface_capacity(&inputs),
            tlof_ops_per_h: planning::tlof_capacity(&inputs),
            capacity_ops_per_h: c.operations,
            binding: c.binding,
            pads_for_target: planning::min_parking_pads(config.planning.target_departures_per_h, &inputs),
        });
    }
    let min_fleet = legs.iter().map(|l| l.min_fleet).max().unwrap_or(0);
    Ok(PlanReport { target_departures_per_h: config.planning.target_departures_per_h, vertiports, legs, min_fleet })
}

pub fn write_plan_text<W: io::Write>(report: &PlanReport, mut w: W) -> io::Result<()> {
    writeln!(w, "vertiport capacity (per hour)")?;
    for v in &report.vertiports {
        let binding = match v.binding {
            Binding::Surface => "surface",
            Binding::Tlof => "tlof",
        };
        let pads = v.pads_for_target.map_or_else(|| "tlof-limited".to_owned(), |p| p.to_string());
        writeln!(
            w,
            "  {}: pads {} tlofs {} surface {:.2} cycles, tlof {:.2} ops, capacity {:.2} ops ({binding}-bound), pads for {} dep/h: {pads}",
            v.vertiport, v.pads, v.tlofs, v.surface_cycles_per_h, v.tlof_ops_per_h, v.capacity_ops_per_h, report.target_departures_per_h
        )?;
    }
    writeln!(w, "fleet sizing")?;
    for l in &report.legs {
        writeln!(
            w,
            "  {}->{} {:.1} mi: flight {:.2} min, soc {:.2}%, turnaround {:.2} min, round trip {:.2} min, {} departures/day, fleet {}",
            l.origin, l.destination, l.distance_mi, l.flight_min, l.leg_soc_pct, l.turnaround_min, l.round_trip_min, l.expected_departures, l.min_fleet
        )?;
    }
    writeln!(w, "minimum fleet: {}", report.min_fleet)
}

pub fn write_plan_csv<W: io::Write>(report: &PlanReport, writer: W) -> Result<(), csv::Error> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    out.write_record(["kind", "name", "metric", "value"])?;
    for v in &report.vertiports {
        let rows = [
            ("pads", f64::from(v.pads)),
            ("tlofs", f64::from(v.tlofs)),
            ("surface_cycles_per_h", v.surface_cycles_per_h),
            ("tlof_ops_per_h", v.tlof_ops_per_h),
            ("capacity_ops_per_h", v.capacity_ops_per_h),
        ];
        for (m, x) in rows {
            out.write_record(["vertiport", &v.vertiport, m, &x.to_string()])?;
        }
        let binding = if v.binding == Binding::Surface { "surface" } else { "tlof" };
        out.write_record(["vertiport", &v.vertiport, "binding", binding])?;
        let pads = v.pads_for_target.map(|p| p.to_string()).unwrap_or_default();
        out.write_record(["vertiport", &v.vertiport, "pads_for_target", &pads])?;
    }
    for l in &report.legs {
        let name = format!("{}->{}", l.origin, l.destination);
        let rows = [
            ("distance_mi", l.distance_mi),
            ("flight_min", l.flight_min),
            ("leg_soc_pct", l.leg_soc_pct),
            ("turnaround_min", l.turnaround_min),
            ("round_trip_min", l.round_trip_min),
            ("expected_departures", f64::from(l.expected_departures)),
            ("min_fleet", f64::from(l.min_fleet)),
        ];
        for (m, x) in rows {
            out.write_record(["leg", &name, m, &x.to_string()])?;
        }
    }
    out.write_record(["network", "all", "min_fleet", &report.min_fleet.to_string()])?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"
        [fleet]
        size = 6
        [network]
        [[network.vertiports]]
        id = "A"
        [[network.vertiports]]
        id = "B"
        [[network.legs]]
        from = "A"
        to = "B"
        distance_mi = 24.0
    "#;

    fn minimal() -> ScenarioConfig {
        ScenarioConfig::parse(MINIMAL, PathBuf::new()).unwrap()
    }

    fn fields(err: ScenarioError) -> Vec<String> {
        match err {
            ScenarioError::Invalid(errors) => errors.into_iter().map(|e| e.field).collect(),
            other => panic!("expected field errors, got {other}"),
        }
    }

    #[test]
    fn defaults_follow_the_fleet() {
        let c = minimal();
        c.validate().unwrap();
        assert_eq!((c.pads(0), c.pads(1), c.chargers(0)), (3, 3, 3));
        assert_eq!(c.placement(), vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(c.horizon(), SimTime::from_hours(24.0));
        let odd = c.with_cell(7, Some(12.0), 9);
        assert_eq!((odd.pads(0), odd.seed, odd.network.legs[0].distance_mi), (4, 9, 12.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("size = 6", "size = 6\nsizee = 7");
        assert!(matches!(ScenarioConfig::parse(&text, PathBuf::new()), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn invalid_fields_are_named() {
        let mut c = minimal();
        c.fleet.size = 0;
        c.network.legs[0].to = "C".into();
        c.network.vertiports[1].tlofs = 0;
        c.horizon_h = -1.0;
        let f = fields(c.validate().unwrap_err());
        for expected in ["horizon_h", "network.vertiports[1].tlofs", "network.legs[0].to", "fleet.size"] {
            assert!(f.iter().any(|x| x == expected), "{expected} missing from {f:?}");
        }

        let mut c = minimal();
        c.fleet.placement = Some(vec![6, 0]);
        assert_eq!(fields(c.validate().unwrap_err()), vec!["network.vertiports[0].pads"]);
        c.fleet.placement = Some(vec![2, 2]);
        assert_eq!(fields(c.validate().unwrap_err()), vec!["fleet.placement"]);

        let mut c = minimal();
        c.demand = Some("no/such/file.csv".into());
        assert_eq!(fields(c.validate().unwrap_err()), vec!["demand"]);
    }

    #[test]
    fn demand_must_name_known_vertiports() {
        let mut c = minimal();
        c.network.vertiports[1].id = "C".into();
        c.network.legs[0].to = "C".into();
        assert_eq!(fields(c.demand_profile().unwrap_err()), vec!["demand", "demand"]);
    }

    #[test]
    fn baseline_plan_is_tlof_bound_at_48() {
        let mut c = minimal();
        c.fleet.size = 14;
        let report = plan(&c).unwrap();
        for v in &report.vertiports {
            assert!((v.tlof_ops_per_h - 48.0).abs() < 1e-9, "{}", v.tlof_ops_per_h);
        }
        assert_eq!(report.legs.len(), 2);
        assert!(report.min_fleet > 0);
        let mut text = Vec::new();
        write_plan_text(&report, &mut text).unwrap();
        assert!(String::from_utf8(text).unwrap().contains("tlof 48.00 ops"));
    }

    #[test]
    fn derived_turnaround_tracks_distance() {
        let mut c = minimal();
        let mut turnaround = Vec::new();
        for d in [12.0, 24.0, 36.0] {
            c.network.legs[0].distance_mi = d;
            turnaround.push(plan(&c).unwrap().legs[0].turnaround_min);
        }
        assert!(turnaround[0] < turnaround[1] && turnaround[1] < turnaround[2], "{turnaround:?}");
        c.planning.turnaround_min = Some(13.0);
        assert_eq!(plan(&c).unwrap().legs[0].turnaround_min, 13.0);
    }

    #[test]
    fn sweep_cells_cover_the_cross_product() {
        let spec = SweepSpec { fleets: vec![8, 10], distances_mi: vec![12.0, 24.0, 36.0], seeds: vec![1, 2] };
        assert_eq!(spec.cells().len(), 12);
        let spec = SweepSpec { distances_mi: vec![], ..spec };
        assert_eq!(spec.cells().len(), 4);
    }

    fn arb_config() -> impl Strategy<Value = ScenarioConfig> {
        (
            any::<u64>(),
            1u32..30,
            proptest::option::of(1u32..20),
            1.0..60.0f64,
            21.0..100.0f64,
            proptest::option::of(1.0..60.0f64),
            any::<bool>(),
            proptest::option::of((0.0..10.0f64, 0.0..10.0f64)),
        )
            .prop_map(|(seed, size, pads, dist, soc, turn, events, pos)| {
                let mut c = minimal();
                c.seed = seed;
                c.fleet.size = size;
                c.fleet.initial_soc = soc;
                c.network.vertiports[0].pads = pads;
                c.network.vertiports[1].chargers = pads;
                c.network.vertiports[0].position_mi = pos.map(|(x, y)| [x, y]);
                c.network.legs[0].distance_mi = dist;
                c.planning.turnaround_min = turn;
                c.output.record_events = events;
                c.demand = events.then(|| PathBuf::from("demand.csv"));
                c
            })
    }

    proptest! {
        #[test]
        fn toml_round_trip_is_identity(c in arb_config()) {
            let text = c.to_toml();
            let back = ScenarioConfig::parse(&text, PathBuf::new()).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.to_toml(), text);
        }
    }
}
