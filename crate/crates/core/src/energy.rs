//! Flight physics: per-phase electric power, energy-optimal speeds and
//! mission energy over the seven-phase profile.
//!
//! Powers are returned in kW, speeds in m/s, energies in kWh. Weight is the
//! take-off mass less the passengers not carried.

use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GRAVITY: f64 = 9.81;
pub const RHO_SEA_LEVEL: f64 = 1.225;
pub const METERS_PER_FOOT: f64 = 0.3048;
pub const METERS_PER_MILE: f64 = 1609.344;
pub const MPS_PER_MPH: f64 = 0.44704;

/// Descending phases never draw less than this share of level-flight power.
pub const DESCENT_POWER_FLOOR: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("aircraft parameter {0} is out of range")]
    BadParameter(&'static str),
    #[error("{occupied} occupied seats exceeds the {seats} available")]
    TooManyPassengers { occupied: u32, seats: u32 },
    #[error("air density must be positive")]
    BadDensity,
    #[error("forward speed must be positive for wing-borne flight")]
    ZeroSpeed,
    #[error("{distance_mi} mi is shorter than the {minimum_mi:.2} mi the climb and descent cover")]
    InfeasibleMission { distance_mi: f64, minimum_mi: f64 },
    #[error("reserve fraction must lie in [0, 1)")]
    BadReserve,
    #[error("flight profile field {0} is out of range")]
    BadProfile(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AircraftParams {
    pub mtom_kg: f64,
    pub interference_factor: f64,
    pub disk_load_kg_m2: f64,
    pub wing_area_m2: f64,
    pub figure_of_merit: f64,
    pub cd0: f64,
    pub cl_max: f64,
    pub eta_hover: f64,
    pub eta_climb: f64,
    pub eta_descent: f64,
    pub eta_cruise: f64,
    pub passenger_weight_kg: f64,
    pub seats: u32,
}

impl Default for AircraftParams {
    fn default() -> Self {
        AircraftParams {
            mtom_kg: 2182.0,
            interference_factor: 1.03,
            disk_load_kg_m2: 45.9,
            wing_area_m2: 13.0,
            figure_of_merit: 0.8,
            cd0: 0.015,
            cl_max: 1.5,
            eta_hover: 0.85,
            eta_climb: 0.85,
            eta_descent: 0.85,
            eta_cruise: 0.9,
            passenger_weight_kg: 100.0,
            seats: 4,
        }
    }
}

fn unit_interval(v: f64) -> bool {
    v > 0.0 && v <= 1.0
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl AircraftParams {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let checks: [(&'static str, bool); 13] = [
            ("mtom_kg", positive(self.mtom_kg)),
            ("interference_factor", positive(self.interference_factor)),
            ("disk_load_kg_m2", positive(self.disk_load_kg_m2)),
            ("wing_area_m2", positive(self.wing_area_m2)),
            ("figure_of_merit", unit_interval(self.figure_of_merit)),
            ("cd0", positive(self.cd0)),
            ("cl_max", positive(self.cl_max)),
            ("eta_hover", unit_interval(self.eta_hover)),
            ("eta_climb", unit_interval(self.eta_climb)),
            ("eta_descent", unit_interval(self.eta_descent)),
            ("eta_cruise", unit_interval(self.eta_cruise)),
            ("passenger_weight_kg", self.passenger_weight_kg >= 0.0 && self.passenger_weight_kg.is_finite()),
            ("seats", self.seats >= 1),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(EnergyError::BadParameter(name));
            }
        }
        if self.empty_mass_kg() <= 0.0 {
            return Err(EnergyError::BadParameter("passenger_weight_kg"));
        }
        Ok(())
    }

    fn empty_mass_kg(&self) -> f64 {
        self.mtom_kg - f64::from(self.seats) * self.passenger_weight_kg
    }

    pub fn rotor_area_m2(&self) -> f64 {
        self.mtom_kg / self.disk_load_kg_m2
    }

    /// Speed below which the wing cannot carry the aircraft.
    pub fn stall_speed(&self, rho: f64, occupied_seats: u32) -> Result<f64, EnergyError> {
        let w = mission_weight(self, occupied_seats)?;
        check_rho(rho)?;
        Ok((2.0 * w / (rho * self.wing_area_m2 * self.cl_max)).sqrt())
    }
}

fn check_rho(rho: f64) -> Result<(), EnergyError> {
    if positive(rho) {
        Ok(())
    } else {
        Err(EnergyError::BadDensity)
    }
}

/// Weight in newtons with unoccupied seats deducted.
pub fn mission_weight(params: &AircraftParams, occupied_seats: u32) -> Result<f64, EnergyError> {
    if occupied_seats > params.seats {
        return Err(EnergyError::TooManyPassengers { occupied: occupied_seats, seats: params.seats });
    }
    let empty_seats = f64::from(params.seats - occupied_seats);
    Ok((params.mtom_kg - empty_seats * params.passenger_weight_kg) * GRAVITY)
}

pub fn induced_drag_coefficient(cd0: f64, ld_max: f64) -> f64 {
    1.0 / (4.0 * cd0 * ld_max * ld_max)
}

fn floor_descent(power_w: f64, level_w: f64, vertical_speed: f64) -> f64 {
    if vertical_speed < 0.0 {
        power_w.max(DESCENT_POWER_FLOOR * level_w)
    } else {
        power_w
    }
}

/// Rotor-borne take-off and landing power. Negative `vertical_speed` is a
/// hover descent.
pub fn hover_power(
    params: &AircraftParams,
    vertical_speed: f64,
    rho: f64,
    occupied_seats: u32,
) -> Result<f64, EnergyError> {
    check_rho(rho)?;
    let w = mission_weight(params, occupied_seats)?;
    let fw = params.interference_factor * w;
    let induced = fw / params.figure_of_merit * (fw / params.rotor_area_m2() / (2.0 * rho)).sqrt();
    let p = floor_descent(induced + w * vertical_speed / 2.0, induced, vertical_speed);
    Ok(p / params.eta_hover / 1000.0)
}

fn drag_power(params: &AircraftParams, w: f64, speed: f64, ld: f64, rho: f64) -> f64 {
    let q_s = 0.5 * rho * speed * params.wing_area_m2;
    let k = induced_drag_coefficient(params.cd0, ld);
    q_s * speed * speed * params.cd0 + k * w * w / q_s
}

/// Wing-borne climb or descent power. Negative `vertical_speed` is a descent
/// and uses the descent efficiency.
pub fn climb_descent_power(
    params: &AircraftParams,
    speed: f64,
    vertical_speed: f64,
    ld: f64,
    rho: f64,
    occupied_seats: u32,
) -> Result<f64, EnergyError> {
    check_rho(rho)?;
    if !(speed > 0.0) {
        return Err(EnergyError::ZeroSpeed);
    }
    let w = mission_weight(params, occupied_seats)?;
    let level = drag_power(params, w, speed, ld, rho);
    let p = floor_descent(w * vertical_speed + level, level, vertical_speed);
    let eta = if vertical_speed < 0.0 { params.eta_descent } else { params.eta_climb };
    Ok(p / eta / 1000.0)
}

pub fn cruise_power(
    params: &AircraftParams,
    speed: f64,
    vertical_speed: f64,
    ld: f64,
    occupied_seats: u32,
) -> Result<f64, EnergyError> {
    if !(ld > 0.0) {
        return Err(EnergyError::BadParameter("lift_to_drag"));
    }
    let w = mission_weight(params, occupied_seats)?;
    Ok((w * vertical_speed + w * speed / ld) / params.eta_cruise / 1000.0)
}

fn speed_scale(params: &AircraftParams, ld: f64, rho: f64, occupied_seats: u32) -> Result<f64, EnergyError> {
    check_rho(rho)?;
    let w = mission_weight(params, occupied_seats)?;
    let wing_load = 2.0 * w / (rho * params.wing_area_m2);
    Ok(wing_load * wing_load * induced_drag_coefficient(params.cd0, ld))
}

/// Speed minimising level-flight power.
pub fn min_power_speed(params: &AircraftParams, ld: f64, rho: f64, occupied_seats: u32) -> Result<f64, EnergyError> {
    Ok((speed_scale(params, ld, rho, occupied_seats)? / (3.0 * params.cd0)).powf(0.25))
}

/// Speed minimising drag, hence energy per distance.
pub fn best_range_speed(params: &AircraftParams, ld: f64, rho: f64, occupied_seats: u32) -> Result<f64, EnergyError> {
    Ok((speed_scale(params, ld, rho, occupied_seats)? / params.cd0).powf(0.25))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpeedRule {
    Fixed { mps: f64 },
    MinPower,
    BestRange,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    HoverClimb,
    ClimbTransition,
    Climb,
    Cruise,
    Descent,
    DescentTransition,
    HoverDescent,
}

impl PhaseKind {
    pub const ALL: [PhaseKind; 7] = [
        PhaseKind::HoverClimb,
        PhaseKind::ClimbTransition,
        PhaseKind::Climb,
        PhaseKind::Cruise,
        PhaseKind::Descent,
        PhaseKind::DescentTransition,
        PhaseKind::HoverDescent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhaseKind::HoverClimb => "hover_climb",
            PhaseKind::ClimbTransition => "climb_transition",
            PhaseKind::Climb => "climb",
            PhaseKind::Cruise => "cruise",
            PhaseKind::Descent => "descent",
            PhaseKind::DescentTransition => "descent_transition",
            PhaseKind::HoverDescent => "hover_descent",
        }
    }
}

impl fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Symmetric climb/descent profile around a level cruise segment.
///
/// The defaults are calibration choices: with them the 12, 24 and 36 mile
/// full-load missions land within 10% of the published SoC draws and each
/// TLOF operation (hover plus transition) lasts exactly 60 s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlightProfile {
    pub hover_altitude_ft: f64,
    pub transition_altitude_ft: f64,
    pub cruise_altitude_ft: f64,
    pub hover_vertical_speed_mps: f64,
    pub transition_vertical_speed_mps: f64,
    pub climb_vertical_speed_mps: f64,
    pub transition_speed: SpeedRule,
    pub climb_speed: SpeedRule,
    pub cruise_speed: SpeedRule,
    pub climb_lift_to_drag: f64,
    pub cruise_lift_to_drag: f64,
    pub rho: f64,
}

impl Default for FlightProfile {
    fn default() -> Self {
        FlightProfile {
            hover_altitude_ft: 50.0,
            transition_altitude_ft: 300.0,
            cruise_altitude_ft: 1000.0,
            hover_vertical_speed_mps: 0.762,
            transition_vertical_speed_mps: 1.905,
            climb_vertical_speed_mps: 7.62,
            transition_speed: SpeedRule::MinPower,
            climb_speed: SpeedRule::MinPower,
            cruise_speed: SpeedRule::BestRange,
            climb_lift_to_drag: 15.6,
            cruise_lift_to_drag: 18.0,
            rho: RHO_SEA_LEVEL,
        }
    }
}

impl FlightProfile {
    pub fn validate(&self) -> Result<(), EnergyError> {
        if !(self.hover_altitude_ft > 0.0
            && self.transition_altitude_ft > self.hover_altitude_ft
            && self.cruise_altitude_ft > self.transition_altitude_ft
            && self.cruise_altitude_ft.is_finite())
        {
            return Err(EnergyError::BadProfile("altitudes"));
        }
        let speeds = [
            ("hover_vertical_speed_mps", self.hover_vertical_speed_mps),
            ("transition_vertical_speed_mps", self.transition_vertical_speed_mps),
            ("climb_vertical_speed_mps", self.climb_vertical_speed_mps),
            ("climb_lift_to_drag", self.climb_lift_to_drag),
            ("cruise_lift_to_drag", self.cruise_lift_to_drag),
        ];
        for (name, v) in speeds {
            if !positive(v) {
                return Err(EnergyError::BadProfile(name));
            }
        }
        for rule in [self.transition_speed, self.climb_speed, self.cruise_speed] {
            if let SpeedRule::Fixed { mps } = rule {
                if !positive(mps) {
                    return Err(EnergyError::BadProfile("speed"));
                }
            }
        }
        check_rho(self.rho)
    }

    fn resolve(&self, rule: SpeedRule, params: &AircraftParams, ld: f64, seats: u32) -> Result<f64, EnergyError> {
        match rule {
            SpeedRule::Fixed { mps } => Ok(mps),
            SpeedRule::MinPower => min_power_speed(params, ld, self.rho, seats),
            SpeedRule::BestRange => best_range_speed(params, ld, self.rho, seats),
        }
    }

    /// Seconds a single TLOF operation lasts: hover plus transition.
    pub fn tlof_operation_s(&self) -> f64 {
        let hover = self.hover_altitude_ft * METERS_PER_FOOT / self.hover_vertical_speed_mps;
        let transition = (self.transition_altitude_ft - self.hover_altitude_ft) * METERS_PER_FOOT
            / self.transition_vertical_speed_mps;
        hover + transition
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseEnergy {
    pub phase: PhaseKind,
    pub duration_s: f64,
    pub horizontal_m: f64,
    pub forward_speed_mps: f64,
    pub vertical_speed_mps: f64,
    pub power_kw: f64,
    pub energy_kwh: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MissionEnergy {
    pub distance_mi: f64,
    pub occupied_seats: u32,
    pub phases: Vec<PhaseEnergy>,
    pub total_kwh: f64,
    pub duration_s: f64,
}

impl MissionEnergy {
    pub fn phase(&self, kind: PhaseKind) -> &PhaseEnergy {
        self.phases.iter().find(|p| p.phase == kind).expect("every mission has all seven phases")
    }

    /// Percent of a battery of `capacity_kwh` this mission draws.
    pub fn soc_drop(&self, capacity_kwh: f64) -> f64 {
        100.0 * self.total_kwh / capacity_kwh
    }
}

fn phase(kind: PhaseKind, duration_s: f64, forward: f64, vertical: f64, power_kw: f64) -> PhaseEnergy {
    PhaseEnergy {
        phase: kind,
        duration_s,
        horizontal_m: forward * duration_s,
        forward_speed_mps: forward,
        vertical_speed_mps: vertical,
        power_kw,
        energy_kwh: power_kw * duration_s / 3600.0,
    }
}

/// Integrates power over the seven phases of a `distance_mi` mission.
pub fn mission_energy(
    params: &AircraftParams,
    profile: &FlightProfile,
    distance_mi: f64,
    occupied_seats: u32,
) -> Result<MissionEnergy, EnergyError> {
    params.validate()?;
    profile.validate()?;
    let seats = occupied_seats;
    let rho = profile.rho;
    let ld_c = profile.climb_lift_to_drag;
    let v_tr = profile.resolve(profile.transition_speed, params, ld_c, seats)?;
    let v_cl = profile.resolve(profile.climb_speed, params, ld_c, seats)?;
    let v_cr = profile.resolve(profile.cruise_speed, params, profile.cruise_lift_to_drag, seats)?;

    let ft = METERS_PER_FOOT;
    let hv = profile.hover_vertical_speed_mps;
    let tv = profile.transition_vertical_speed_mps;
    let cv = profile.climb_vertical_speed_mps;
    let t_hover = profile.hover_altitude_ft * ft / hv;
    let t_trans = (profile.transition_altitude_ft - profile.hover_altitude_ft) * ft / tv;
    let t_climb = (profile.cruise_altitude_ft - profile.transition_altitude_ft) * ft / cv;

    let mut phases = vec![
        phase(PhaseKind::HoverClimb, t_hover, 0.0, hv, hover_power(params, hv, rho, seats)?),
        phase(PhaseKind::ClimbTransition, t_trans, v_tr, tv, climb_descent_power(params, v_tr, tv, ld_c, rho, seats)?),
        phase(PhaseKind::Climb, t_climb, v_cl, cv, climb_descent_power(params, v_cl, cv, ld_c, rho, seats)?),
    ];
    let descent = [
        phase(PhaseKind::Descent, t_climb, v_cl, -cv, climb_descent_power(params, v_cl, -cv, ld_c, rho, seats)?),
        phase(
            PhaseKind::DescentTransition,
            t_trans,
            v_tr,
            -tv,
            climb_descent_power(params, v_tr, -tv, ld_c, rho, seats)?,
        ),
        phase(PhaseKind::HoverDescent, t_hover, 0.0, -hv, hover_power(params, -hv, rho, seats)?),
    ];
    let non_cruise_m: f64 = phases.iter().chain(descent.iter()).map(|p| p.horizontal_m).sum();
    let cruise_m = distance_mi * METERS_PER_MILE - non_cruise_m;
    if !(cruise_m >= 0.0) || !distance_mi.is_finite() {
        return Err(EnergyError::InfeasibleMission { distance_mi, minimum_mi: non_cruise_m / METERS_PER_MILE });
    }
    let p_cruise = cruise_power(params, v_cr, 0.0, profile.cruise_lift_to_drag, seats)?;
    phases.push(phase(PhaseKind::Cruise, cruise_m / v_cr, v_cr, 0.0, p_cruise));
    phases.extend(descent);

    let total_kwh = phases.iter().map(|p| p.energy_kwh).sum();
    let duration_s = phases.iter().map(|p| p.duration_s).sum();
    Ok(MissionEnergy { distance_mi, occupied_seats, phases, total_kwh, duration_s })
}

/// Capacity such that a full-load flight of `range_mi` leaves
/// `reserve_fraction` of the battery untouched.
pub fn size_battery(
    params: &AircraftParams,
    profile: &FlightProfile,
    range_mi: f64,
    reserve_fraction: f64,
) -> Result<f64, EnergyError> {
    if !(0.0..1.0).contains(&reserve_fraction) {
        return Err(EnergyError::BadReserve);
    }
    let m = mission_energy(params, profile, range_mi, params.seats)?;
    Ok(m.total_kwh / (1.0 - reserve_fraction))
}

/// Per-phase CSV with a trailing total row.
pub fn write_energy_table<W: io::Write>(mission: &MissionEnergy, writer: W) -> Result<(), csv::Error> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    out.write_record([
        "phase",
        "duration_s",
        "horizontal_mi",
        "forward_speed_mps",
        "vertical_speed_mps",
        "power_kw",
        "energy_kwh",
    ])?;
    for p in &mission.phases {
        out.write_record([
            p.phase.name().to_owned(),
            format!("{:.3}", p.duration_s),
            format!("{:.4}", p.horizontal_m / METERS_PER_MILE),
            format!("{:.3}", p.forward_speed_mps),
            format!("{:.3}", p.vertical_speed_mps),
            format!("{:.3}", p.power_kw),
            format!("{:.4}", p.energy_kwh),
        ])?;
    }
    out.write_record([
        "total".to_owned(),
        format!("{:.3}", mission.duration_s),
        format!("{:.4}", mission.distance_mi),
        String::new(),
        String::new(),
        String::new(),
        format!("{:.4}", mission.total_kwh),
    ])?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table1() -> AircraftParams {
        AircraftParams::default()
    }

    /// Argmin of `f` on a uniform grid; step 0.005 m/s.
    fn grid_argmin(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let n = ((hi - lo) / 0.005) as usize;
        (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap()
    }

    #[test]
    fn induced_drag_values() {
        assert!((induced_drag_coefficient(0.015, 18.0) - 1.0 / 19.44).abs() < 1e-12);
        assert!((induced_drag_coefficient(0.015, 18.0) - 0.05144).abs() < 1e-5);
        assert!((induced_drag_coefficient(0.015, 15.6) - 0.06848).abs() < 1e-5);
        assert!(induced_drag_coefficient(0.015, 1e6) < 1e-9);
    }

    #[test]
    fn hover_power_hand_evaluated() {
        // W = 21405.42 N, A = 47.538 m^2.
        let w = 2182.0 * 9.81;
        let fw = 1.03 * w;
        let a = 2182.0 / 45.9;
        let hand = fw / 0.8 * (fw / a / 2.45_f64).sqrt() / 0.85 / 1000.0;
        let p = hover_power(&table1(), 0.0, 1.225, 4).unwrap();
        assert!((p - hand).abs() < 1e-9);
        assert!((p - 446.0).abs() < 1.0, "{p}");
        let ideal = AircraftParams { eta_hover: 1.0, ..table1() };
        let q = hover_power(&ideal, 0.0, 1.225, 4).unwrap();
        assert!((q - 379.0).abs() < 1.0, "{q}");
        assert!((q / p - 0.85).abs() < 1e-12);
        let climbing = hover_power(&table1(), 2.0, 1.225, 4).unwrap();
        assert!((climbing - p - w * 2.0 / 2.0 / 0.85 / 1000.0).abs() < 1e-9);
    }

    #[test]
    fn climb_power_structure() {
        let p = table1();
        assert_eq!(climb_descent_power(&p, 0.0, 0.0, 18.0, 1.225, 4), Err(EnergyError::ZeroSpeed));
        let up = climb_descent_power(&p, 60.0, 0.0, 15.6, 1.225, 4).unwrap();
        let down = climb_descent_power(&p, 60.0, -0.0, 15.6, 1.225, 4).unwrap();
        assert_eq!(up, down);
        let w = mission_weight(&p, 4).unwrap();
        let v: f64 = 60.0;
        let k = induced_drag_coefficient(0.015, 15.6);
        let parasite = |rho: f64| 0.5 * rho * v.powi(3) * 13.0 * 0.015;
        let induced = |rho: f64| k * w * w / (0.5 * rho * v * 13.0);
        assert!((parasite(2.45) - 2.0 * parasite(1.225)).abs() < 1e-9);
        assert!((induced(2.45) - 0.5 * induced(1.225)).abs() < 1e-9);
        let total = climb_descent_power(&p, v, 0.0, 15.6, 2.45, 4).unwrap();
        assert!((total - (parasite(2.45) + induced(2.45)) / 0.85 / 1000.0).abs() < 1e-9);
    }

    #[test]
    fn descent_power_is_floored() {
        let p = table1();
        let level = climb_descent_power(&p, 55.0, 0.0, 15.6, 1.225, 4).unwrap();
        let steep = climb_descent_power(&p, 55.0, -30.0, 15.6, 1.225, 4).unwrap();
        assert!((steep - DESCENT_POWER_FLOOR * level).abs() < 1e-9);
    }

    #[test]
    fn cruise_power_hand_evaluated() {
        let p = table1();
        let got = cruise_power(&p, 70.6, 0.0, 18.0, 4).unwrap();
        let hand = 2182.0 * 9.81 * 70.6 / 18.0 / 0.9 / 1000.0;
        assert!((got - hand).abs() < 1e-9);
        assert!((got - 93.3).abs() < 0.1);
        assert_eq!(cruise_power(&p, 0.0, 0.0, 18.0, 4).unwrap(), 0.0);
        let half = cruise_power(&p, 70.6, 0.0, 9.0, 4).unwrap();
        assert!((half - 2.0 * got).abs() < 1e-9);
    }

    #[test]
    fn speeds_match_grid_search() {
        let p = table1();
        let vbr = best_range_speed(&p, 18.0, 1.225, 4).unwrap();
        let vmp = min_power_speed(&p, 18.0, 1.225, 4).unwrap();
        let w = mission_weight(&p, 4).unwrap();
        let drag = |v: f64| drag_power(&p, w, v, 18.0, 1.225) / v;
        let power = |v: f64| climb_descent_power(&p, v, 0.0, 18.0, 1.225, 4).unwrap();
        assert!((grid_argmin(10.0, 100.0, drag) - vbr).abs() < 0.1);
        assert!((grid_argmin(10.0, 100.0, power) - vmp).abs() < 0.1);
        assert!((vbr - 70.6).abs() < 0.1, "{vbr}");
        assert!((vmp - 53.6).abs() < 0.1, "{vmp}");
        let mph = vbr / MPS_PER_MPH;
        assert!((150.0..=160.0).contains(&mph), "{mph}");
        assert!(vmp < vbr);
    }

    #[test]
    fn weight_deductions() {
        let p = table1();
        assert_eq!(mission_weight(&p, 4).unwrap(), 2182.0 * GRAVITY);
        assert_eq!(mission_weight(&p, 0).unwrap(), 1782.0 * GRAVITY);
        assert_eq!(mission_weight(&p, 2).unwrap(), 1982.0 * GRAVITY);
        assert!(mission_weight(&p, 5).is_err());
    }

    #[test]
    fn default_tlof_operation_is_one_minute() {
        assert!((FlightProfile::default().tlof_operation_s() - 60.0).abs() < 1e-9);
    }

    #[test]
    fn mission_marginal_is_cruise_only() {
        let (p, prof) = (table1(), FlightProfile::default());
        let e: Vec<MissionEnergy> =
            [12.0, 24.0, 36.0].iter().map(|&d| mission_energy(&p, &prof, d, 4).unwrap()).collect();
        let v = best_range_speed(&p, 18.0, 1.225, 4).unwrap();
        let twelve_miles = cruise_power(&p, v, 0.0, 18.0, 4).unwrap() * 12.0 * METERS_PER_MILE / v / 3600.0;
        assert!((e[2].total_kwh - e[1].total_kwh - twelve_miles).abs() < 1e-9);
        assert!((e[1].total_kwh - e[0].total_kwh - twelve_miles).abs() < 1e-9);
        for m in &e {
            let parts: f64 = m.phases.iter().map(|p| p.energy_kwh).sum();
            assert_eq!(parts, m.total_kwh);
            let order: Vec<PhaseKind> = m.phases.iter().map(|p| p.phase).collect();
            assert_eq!(order, PhaseKind::ALL);
        }
    }

    #[test]
    fn mission_by_quadrature() {
        // Independent re-integration: fine time steps over each phase.
        let (p, prof) = (table1(), FlightProfile::default());
        let m = mission_energy(&p, &prof, 24.0, 4).unwrap();
        let mut kwh = 0.0;
        for ph in &m.phases {
            let steps = 1000;
            let dt = ph.duration_s / steps as f64;
            let power = match ph.phase {
                PhaseKind::HoverClimb | PhaseKind::HoverDescent => {
                    hover_power(&p, ph.vertical_speed_mps, 1.225, 4).unwrap()
                }
                PhaseKind::Cruise => cruise_power(&p, ph.forward_speed_mps, 0.0, 18.0, 4).unwrap(),
                _ => climb_descent_power(&p, ph.forward_speed_mps, ph.vertical_speed_mps, 15.6, 1.225, 4).unwrap(),
            };
            kwh += (0..steps).map(|_| power * dt / 3600.0).sum::<f64>();
        }
        assert!((kwh - m.total_kwh).abs() / m.total_kwh < 1e-9);
    }

    #[test]
    fn too_short_mission_rejected() {
        let r = mission_energy(&table1(), &FlightProfile::default(), 2.0, 4);
        assert!(matches!(r, Err(EnergyError::InfeasibleMission { .. })));
    }

    #[test]
    fn battery_sizing() {
        let (p, prof) = (table1(), FlightProfile::default());
        let e = mission_energy(&p, &prof, 100.0, 4).unwrap().total_kwh;
        assert_eq!(size_battery(&p, &prof, 100.0, 0.0).unwrap(), e);
        assert!((size_battery(&p, &prof, 100.0, 0.5).unwrap() - 2.0 * e).abs() < 1e-9);
        assert!(size_battery(&p, &prof, 100.0, 1.0).is_err());
    }

    #[test]
    fn energy_table_rows() {
        let m = mission_energy(&table1(), &FlightProfile::default(), 24.0, 4).unwrap();
        let mut buf = Vec::new();
        write_energy_table(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.lines().last().unwrap().starts_with("total,"));
    }

    fn arb_params() -> impl Strategy<Value = AircraftParams> {
        (1000.0..4000.0f64, 20.0..80.0f64, 8.0..25.0f64, 0.01..0.03f64, 0.5..1.0f64).prop_map(
            |(mtom, dl, s, cd0, fom)| AircraftParams {
                mtom_kg: mtom,
                disk_load_kg_m2: dl,
                wing_area_m2: s,
                cd0,
                figure_of_merit: fom,
                ..AircraftParams::default()
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn analytic_optima_match_grid(p in arb_params(), ld in 10.0..25.0f64, seats in 0u32..=4) {
            let w = mission_weight(&p, seats).unwrap();
            let vmp = min_power_speed(&p, ld, 1.225, seats).unwrap();
            let vbr = best_range_speed(&p, ld, 1.225, seats).unwrap();
            let lo = (vmp * 0.5).max(1.0);
            let hi = vbr * 1.5;
            let g_mp = grid_argmin(lo, hi, |v| drag_power(&p, w, v, ld, 1.225));
            let g_br = grid_argmin(lo, hi, |v| drag_power(&p, w, v, ld, 1.225) / v);
            prop_assert!((g_mp - vmp).abs() < 0.1);
            prop_assert!((g_br - vbr).abs() < 0.1);
            prop_assert!(vmp < vbr);
        }

        #[test]
        fn phase_powers_positive_and_monotone(p in arb_params(), d in 15.0..80.0f64, seats in 0u32..4) {
            let prof = FlightProfile::default();
            let m = mission_energy(&p, &prof, d, seats).unwrap();
            prop_assert!(m.phases.iter().all(|ph| ph.power_kw > 0.0 && ph.energy_kwh > 0.0));
            let heavier = mission_energy(&p, &prof, d, seats + 1).unwrap();
            let longer = mission_energy(&p, &prof, d + 1.0, seats).unwrap();
            prop_assert!(heavier.total_kwh > m.total_kwh);
            prop_assert!(longer.total_kwh > m.total_kwh);
            let parts: f64 = m.phases.iter().map(|ph| ph.energy_kwh).sum();
            prop_assert_eq!(parts, m.total_kwh);
        }
    }
}
