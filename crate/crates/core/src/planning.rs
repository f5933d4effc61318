//! Closed-form planners: vertiport throughput, fleet size and pad count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanningError {
    #[error("planner input {0} must be positive")]
    NonPositive(&'static str),
    #[error("window is shorter than one surface cycle")]
    WindowTooShort,
}

/// Surface cycle timings in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityInputs {
    pub pads: u32,
    pub tlofs: u32,
    pub window_s: f64,
    pub arrival_s: f64,
    pub departure_s: f64,
    pub taxi_in_s: f64,
    pub taxi_out_s: f64,
    pub turnaround_s: f64,
}

impl CapacityInputs {
    pub fn validate(&self) -> Result<(), PlanningError> {
        let fields = [
            ("pads", f64::from(self.pads)),
            ("tlofs", f64::from(self.tlofs)),
            ("window_s", self.window_s),
            ("arrival_s", self.arrival_s),
            ("departure_s", self.departure_s),
            ("taxi_in_s", self.taxi_in_s),
            ("taxi_out_s", self.taxi_out_s),
            ("turnaround_s", self.turnaround_s),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PlanningError::NonPositive(name));
            }
        }
        if self.window_s < self.surface_cycle_s() {
            return Err(PlanningError::WindowTooShort);
        }
        Ok(())
    }

    /// Time one pad is tied up by a landing, turnaround and take-off.
    pub fn surface_cycle_s(&self) -> f64 {
        self.arrival_s + self.taxi_in_s + self.turnaround_s + self.taxi_out_s + self.departure_s
    }
}

/// Full surface cycles the pads can host in the window.
pub fn surface_capacity(inputs: &CapacityInputs) -> f64 {
    f64::from(inputs.pads) * inputs.window_s / inputs.surface_cycle_s()
}

/// TLOF operations in the window with arrivals and departures alternating.
pub fn tlof_capacity(inputs: &CapacityInputs) -> f64 {
    2.0 * f64::from(inputs.tlofs) * inputs.window_s / (inputs.arrival_s + inputs.taxi_out_s + inputs.departure_s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    Surface,
    Tlof,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VertiportCapacity {
    pub operations: f64,
    pub binding: Binding,
}

/// Operations per window: the smaller of surface and TLOF throughput. Each
/// surface cycle is one arrival plus one departure.
pub fn vertiport_capacity(inputs: &CapacityInputs) -> VertiportCapacity {
    let surface = 2.0 * surface_capacity(inputs);
    let tlof = tlof_capacity(inputs);
    if surface <= tlof {
        VertiportCapacity { operations: surface, binding: Binding::Surface }
    } else {
        VertiportCapacity { operations: tlof, binding: Binding::Tlof }
    }
}

/// Smallest pad count whose throughput covers `departures_per_window`
/// departures plus as many arrivals. `None` when the TLOFs alone cannot.
pub fn min_parking_pads(departures_per_window: f64, cycle: &CapacityInputs) -> Option<u32> {
    if departures_per_window <= 0.0 {
        return Some(0);
    }
    let needed = 2.0 * departures_per_window;
    if tlof_capacity(cycle) < needed * (1.0 - 1e-9) {
        return None;
    }
    let exact = departures_per_window * cycle.surface_cycle_s() / cycle.window_s;
    // Absorb float noise so an exact fit is not pushed up by one.
    let pads = (exact - 1e-9 * exact.max(1.0)).ceil().max(1.0);
    Some(pads as u32)
}

pub fn round_trip_time(flight_min: f64, turnaround_min: f64) -> f64 {
    2.0 * (flight_min + turnaround_min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetSizeInputs {
    pub flight_min: f64,
    pub turnaround_min: f64,
    pub window_min: f64,
    /// Daily flights per direction; the busiest one sizes the fleet.
    pub daily_flights: Vec<f64>,
}

impl FleetSizeInputs {
    pub fn validate(&self) -> Result<(), PlanningError> {
        if !(self.flight_min >= 0.0 && self.flight_min.is_finite()) {
            return Err(PlanningError::NonPositive("flight_min"));
        }
        if !(self.turnaround_min > 0.0 && self.turnaround_min.is_finite()) {
            return Err(PlanningError::NonPositive("turnaround_min"));
        }
        if !(self.window_min > 0.0 && self.window_min.is_finite()) {
            return Err(PlanningError::NonPositive("window_min"));
        }
        if self.daily_flights.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(PlanningError::NonPositive("daily_flights"));
        }
        Ok(())
    }

    pub fn round_trips_per_aircraft(&self) -> f64 {
        self.window_min / round_trip_time(self.flight_min, self.turnaround_min)
    }
}

/// Aircraft needed so the busiest direction's flights fit in the window.
pub fn min_fleet_size(inputs: &FleetSizeInputs) -> u32 {
    let busiest = inputs.daily_flights.iter().copied().fold(0.0, f64::max);
    let exact = busiest / inputs.round_trips_per_aircraft();
    (exact - 1e-9 * exact.max(1.0)).ceil().max(0.0) as u32
}
