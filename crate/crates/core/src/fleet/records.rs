//! Per-flight, per-passenger and per-interval records a run produces.

use std::io;

use serde::{Deserialize, Serialize};

use super::process::Process;
use crate::energy::PhaseKind;
use crate::kernel::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlightKind {
    Passenger,
    /// Moves an aircraft off a full vertiport.
    SpaceRepositioning,
    /// Brings an aircraft to a vertiport with waiting passengers.
    DemandRepositioning,
}

impl FlightKind {
    pub fn name(self) -> &'static str {
        match self {
            FlightKind::Passenger => "passenger",
            FlightKind::SpaceRepositioning => "space_repositioning",
            FlightKind::DemandRepositioning => "demand_repositioning",
        }
    }

    pub fn is_repositioning(self) -> bool {
        self != FlightKind::Passenger
    }
}

/// Airborne segments in flight order. Holding sits between cruise and descent.
pub const AIRBORNE_SEGMENTS: [Segment; 8] = [
    Segment::Phase(PhaseKind::HoverClimb),
    Segment::Phase(PhaseKind::ClimbTransition),
    Segment::Phase(PhaseKind::Climb),
    Segment::Phase(PhaseKind::Cruise),
    Segment::Holding,
    Segment::Phase(PhaseKind::Descent),
    Segment::Phase(PhaseKind::DescentTransition),
    Segment::Phase(PhaseKind::HoverDescent),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Segment {
    Phase(PhaseKind),
    Holding,
}

impl Segment {
    pub fn name(self) -> &'static str {
        match self {
            Segment::Phase(p) => p.name(),
            Segment::Holding => "holding",
        }
    }

    pub fn index(self) -> usize {
        AIRBORNE_SEGMENTS.iter().position(|s| *s == self).expect("every segment is listed")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlightRecord {
    pub id: u32,
    pub kind: FlightKind,
    pub aircraft: u32,
    pub origin: usize,
    pub destination: usize,
    pub distance_mi: f64,
    pub pax: u32,
    pub seats: u32,
    pub pushback: SimTime,
    pub liftoff: SimTime,
    pub touchdown: SimTime,
    pub parked: SimTime,
    /// Seconds spent in each of `AIRBORNE_SEGMENTS`, waits included.
    pub segment_s: [f64; 8],
    /// kWh drawn in each of `AIRBORNE_SEGMENTS`. Holding draws nothing.
    pub segment_kwh: [f64; 8],
    pub energy_kwh: f64,
    pub soc_before: f64,
    pub soc_after: f64,
}

impl FlightRecord {
    pub fn airborne_s(&self) -> f64 {
        (self.touchdown - self.liftoff).as_secs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PassengerRecord {
    pub id: u32,
    pub origin: usize,
    pub destination: usize,
    pub arrival: SimTime,
    pub boarding: Option<SimTime>,
    pub departure: Option<SimTime>,
    pub landing: Option<SimTime>,
    pub flight: Option<u32>,
}

impl PassengerRecord {
    /// Minutes from arrival to wheels-up, or to `horizon` if never flown.
    pub fn delay_min(&self, horizon: SimTime) -> f64 {
        let end = self.departure.unwrap_or(horizon.max(self.arrival));
        (end - self.arrival).as_minutes()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProcessInterval {
    pub aircraft: u32,
    pub process: Process,
    pub start: SimTime,
    pub end: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChargeRecord {
    pub aircraft: u32,
    pub vertiport: usize,
    pub start: SimTime,
    pub end: SimTime,
    pub soc_from: f64,
    pub soc_to: f64,
    pub battery_kwh: f64,
    pub grid_kwh: f64,
}

fn csv_writer<W: io::Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer)
}

fn secs(t: SimTime) -> String {
    format!("{:.3}", t.as_secs())
}

fn opt_secs(t: Option<SimTime>) -> String {
    t.map(secs).unwrap_or_default()
}

pub fn write_flights_csv<W: io::Write>(
    flights: &[FlightRecord],
    vertiport_ids: &[String],
    writer: W,
) -> Result<(), csv::Error> {
    let mut out = csv_writer(writer);
    let mut header: Vec<String> = [
        "flight_id",
        "type",
        "aircraft",
        "origin",
        "destination",
        "distance_mi",
        "pax",
        "pushback_s",
        "departure_s",
        "arrival_s",
        "parked_s",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(AIRBORNE_SEGMENTS.iter().map(|s| format!("{}_s", s.name())));
    header.extend(["energy_kwh", "soc_before", "soc_after"].iter().map(|s| s.to_string()));
    out.write_record(&header)?;
    for f in flights {
        let mut row = vec![
            f.id.to_string(),
            f.kind.name().to_owned(),
            f.aircraft.to_string(),
            vertiport_ids[f.origin].clone(),
            vertiport_ids[f.destination].clone(),
            format!("{}", f.distance_mi),
            f.pax.to_string(),
            secs(f.pushback),
            secs(f.liftoff),
            secs(f.touchdown),
            secs(f.parked),
        ];
        row.extend(f.segment_s.iter().map(|s| format!("{s:.3}")));
        row.push(format!("{:.4}", f.energy_kwh));
        row.push(format!("{:.4}", f.soc_before));
        row.push(format!("{:.4}", f.soc_after));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_passengers_csv<W: io::Write>(
    passengers: &[PassengerRecord],
    vertiport_ids: &[String],
    horizon: SimTime,
    writer: W,
) -> Result<(), csv::Error> {
    let mut out = csv_writer(writer);
    out.write_record([
        "passenger_id",
        "origin",
        "destination",
        "arrival_s",
        "boarding_s",
        "departure_s",
        "landing_s",
        "flight_id",
        "delay_min",
    ])?;
    for p in passengers {
        out.write_record([
            p.id.to_string(),
            vertiport_ids[p.origin].clone(),
            vertiport_ids[p.destination].clone(),
            secs(p.arrival),
            opt_secs(p.boarding),
            opt_secs(p.departure),
            opt_secs(p.landing),
            p.flight.map(|f| f.to_string()).unwrap_or_default(),
            format!("{:.4}", p.delay_min(horizon)),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_examples() {
        let at = |h: f64, m: f64| SimTime::from_minutes(h * 60.0 + m);
        let p = PassengerRecord {
            id: 0,
            origin: 0,
            destination: 1,
            arrival: at(9.0, 0.0),
            boarding: Some(at(9.0, 5.0)),
            departure: Some(at(9.0, 7.0)),
            landing: None,
            flight: Some(3),
        };
        assert!((p.delay_min(at(24.0, 0.0)) - 7.0).abs() < 1e-9);
        let unserved = PassengerRecord { departure: None, ..p };
        assert!((unserved.delay_min(at(24.0, 0.0)) - 15.0 * 60.0).abs() < 1e-9);
    }

    #[test]
    fn segment_order() {
        assert_eq!(Segment::Holding.index(), 4);
        assert_eq!(Segment::Phase(PhaseKind::Cruise).index(), 3);
    }
}
