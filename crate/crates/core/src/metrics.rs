//! Run outputs reduced to delay, utilization, energy and load statistics.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::PhaseKind;
use crate::fleet::{
    Category, FlightKind, FlightRecord, PassengerRecord, Process, ProcessInterval, Segment, SimulationOutput,
};
use crate::kernel::SimTime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("aircraft {aircraft}: intervals leave a gap or overlap at {at}")]
    Gap { aircraft: u32, at: SimTime },
    #[error("aircraft {aircraft}: intervals stop at {end}, before the horizon {horizon}")]
    Short { aircraft: u32, end: SimTime, horizon: SimTime },
    #[error("interval for aircraft {0} outside the fleet")]
    UnknownAircraft(u32),
}

/// Hours per utilization category.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryHours {
    pub idle: f64,
    pub charge: f64,
    pub cruise: f64,
    pub holding: f64,
    pub other: f64,
}

impl CategoryHours {
    pub fn get(&self, c: Category) -> f64 {
        match c {
            Category::Idle => self.idle,
            Category::Charge => self.charge,
            Category::Cruise => self.cruise,
            Category::Holding => self.holding,
            Category::Other => self.other,
        }
    }

    fn from_ms(ms: &[u64; 5]) -> Self {
        let h = |i: usize| SimTime::from_ms(ms[i]).as_hours();
        CategoryHours { idle: h(0), charge: h(1), cruise: h(2), holding: h(3), other: h(4) }
    }

    pub fn total(&self) -> f64 {
        Category::ALL.iter().map(|&c| self.get(c)).sum()
    }
}

fn category_slot(c: Category) -> usize {
    Category::ALL.iter().position(|&x| x == c).expect("listed")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Utilization {
    pub per_aircraft: Vec<CategoryHours>,
    pub network: CategoryHours,
    /// Exact milliseconds per category across the fleet, in `Category::ALL` order.
    pub network_ms: [u64; 5],
}

/// Wall-clock partition of `[0, horizon]` per aircraft. Intervals must tile
/// each aircraft's timeline from zero to at least the horizon.
pub fn utilization_breakdown(
    intervals: &[ProcessInterval],
    fleet: u32,
    horizon: SimTime,
) -> Result<Utilization, MetricsError> {
    let mut per: Vec<Vec<&ProcessInterval>> = vec![Vec::new(); fleet as usize];
    for i in intervals {
        per.get_mut(i.aircraft as usize).ok_or(MetricsError::UnknownAircraft(i.aircraft))?.push(i);
    }
    let mut per_aircraft = Vec::with_capacity(per.len());
    let mut network_ms = [0u64; 5];
    for (a, list) in per.iter_mut().enumerate() {
        list.sort_by_key(|i| (i.start, i.end));
        let mut ms = [0u64; 5];
        let mut cursor = SimTime::ZERO;
        for i in list.iter() {
            if i.start != cursor || i.end < i.start {
                return Err(MetricsError::Gap { aircraft: a as u32, at: cursor });
            }
            cursor = i.end;
            let span = i.end.min(horizon).saturating_sub(i.start.min(horizon));
            ms[category_slot(i.process.category())] += span.as_ms();
        }
        if cursor < horizon {
            return Err(MetricsError::Short { aircraft: a as u32, end: cursor, horizon });
        }
        for k in 0..5 {
            network_ms[k] += ms[k];
        }
        per_aircraft.push(CategoryHours::from_ms(&ms));
    }
    Ok(Utilization { per_aircraft, network: CategoryHours::from_ms(&network_ms), network_ms })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpmAsm {
    pub rpm: f64,
    pub asm: f64,
    /// `rpm / asm`, or 0 when there is no seat-mile to divide by.
    pub ratio: f64,
    pub ratio_defined: bool,
}

/// Revenue passenger miles over available seat miles, repositioning flights included.
pub fn rpm_asm(flights: &[FlightRecord], seats_per_flight: u32) -> RpmAsm {
    let rpm: f64 = flights.iter().map(|f| f64::from(f.pax) * f.distance_mi).sum();
    let asm: f64 = flights.iter().map(|f| f64::from(seats_per_flight) * f.distance_mi).sum();
    let ratio_defined = asm > 0.0;
    RpmAsm { rpm, asm, ratio: if ratio_defined { rpm / asm } else { 0.0 }, ratio_defined }
}

/// Delay bins in minutes; the last bin is open-ended.
pub const DELAY_BIN_EDGES_MIN: [f64; 8] = [0.0, 5.0, 10.0, 15.0, 30.0, 60.0, 120.0, 240.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub passengers: usize,
    pub served: usize,
    pub unserved: usize,
    pub included_unserved: bool,
    pub mean_min: f64,
    pub median_min: f64,
    pub p90_min: f64,
    pub max_min: f64,
    /// Counts per bin starting at each `DELAY_BIN_EDGES_MIN` entry.
    pub histogram: Vec<usize>,
}

/// Delay to wheels-up. Unserved passengers count with delay to the horizon
/// unless `include_unserved` is false.
pub fn passenger_delays(passengers: &[PassengerRecord], horizon: SimTime, include_unserved: bool) -> DelayStats {
    let served = passengers.iter().filter(|p| p.departure.is_some()).count();
    let mut delays: Vec<f64> =
        passengers.iter().filter(|p| include_unserved || p.departure.is_some()).map(|p| p.delay_min(horizon)).collect();
    delays.sort_by(f64::total_cmp);
    let quantile = |q: f64| {
        if delays.is_empty() {
            return 0.0;
        }
        let idx = ((delays.len() - 1) as f64 * q).round() as usize;
        delays[idx]
    };
    let mut histogram = vec![0usize; DELAY_BIN_EDGES_MIN.len()];
    for &d in &delays {
        let bin = DELAY_BIN_EDGES_MIN.iter().rposition(|&e| d >= e).unwrap_or(0);
        histogram[bin] += 1;
    }
    DelayStats {
        passengers: passengers.len(),
        served,
        unserved: passengers.len() - served,
        included_unserved: include_unserved,
        mean_min: if delays.is_empty() { 0.0 } else { delays.iter().sum::<f64>() / delays.len() as f64 },
        median_min: quantile(0.5),
        p90_min: quantile(0.9),
        max_min: delays.last().copied().unwrap_or(0.0),
        histogram,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub total_kwh: f64,
    pub passenger_kwh: f64,
    pub repositioning_kwh: f64,
    pub by_phase_kwh: BTreeMap<String, f64>,
    pub charged_battery_kwh: f64,
    pub charged_grid_kwh: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertiportThroughput {
    pub vertiport: String,
    /// Liftoffs per clock hour.
    pub departures: Vec<u32>,
    /// Touchdowns per clock hour.
    pub arrivals: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub fleet_size: u32,
    pub horizon_h: f64,
    pub delay: DelayStats,
    pub flights: usize,
    pub passenger_flights: usize,
    pub repositioning_flights: usize,
    pub space_repositioning_flights: usize,
    pub demand_repositioning_flights: usize,
    pub network_hours: CategoryHours,
    pub per_aircraft_hours: Vec<CategoryHours>,
    pub rpm: f64,
    pub asm: f64,
    pub rpm_asm: f64,
    pub rpm_asm_defined: bool,
    pub load_factor: f64,
    pub energy: EnergySummary,
    pub charge_sessions: usize,
    pub avg_charge_session_min: f64,
    pub avg_idle_interval_min: f64,
    pub avg_cruise_min_per_flight: f64,
    pub throughput: Vec<VertiportThroughput>,
}

/// Aggregates one run.
pub fn summarize(out: &SimulationOutput, include_unserved: bool) -> Result<MetricsSummary, MetricsError> {
    let horizon = out.horizon;
    let utilization = utilization_breakdown(&out.intervals, out.fleet_size, horizon)?;
    let count = |k: FlightKind| out.flights.iter().filter(|f| f.kind == k).count();
    let ra = rpm_asm(&out.flights, out.seats);

    let mut energy = EnergySummary::default();
    for phase in PhaseKind::ALL {
        let slot = Segment::Phase(phase).index();
        energy.by_phase_kwh.insert(phase.name().to_owned(), out.flights.iter().map(|f| f.segment_kwh[slot]).sum());
    }
    for f in &out.flights {
        energy.total_kwh += f.energy_kwh;
        if f.kind.is_repositioning() {
            energy.repositioning_kwh += f.energy_kwh;
        } else {
            energy.passenger_kwh += f.energy_kwh;
        }
    }
    energy.charged_battery_kwh = out.charges.iter().map(|c| c.battery_kwh).sum();
    energy.charged_grid_kwh = out.charges.iter().map(|c| c.grid_kwh).sum();

    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let sessions: Vec<f64> = out.charges.iter().map(|c| (c.end - c.start).as_minutes()).collect();
    let idles: Vec<f64> = out
        .intervals
        .iter()
        .filter(|i| i.process == Process::Idle && i.start < horizon)
        .map(|i| (i.end.min(horizon) - i.start).as_minutes())
        .collect();
    let cruise_slot = Segment::Phase(PhaseKind::Cruise).index();
    let cruise: Vec<f64> = out.flights.iter().map(|f| f.segment_s[cruise_slot] / 60.0).collect();

    let hours = (out.end_time.max(horizon).as_hours().ceil() as usize).max(1);
    let throughput = out
        .vertiport_ids
        .iter()
        .enumerate()
        .map(|(v, id)| {
            let mut departures = vec![0u32; hours];
            let mut arrivals = vec![0u32; hours];
            for f in &out.flights {
                if f.origin == v {
                    departures[(f.liftoff.as_hours() as usize).min(hours - 1)] += 1;
                }
                if f.destination == v {
                    arrivals[(f.touchdown.as_hours() as usize).min(hours - 1)] += 1;
                }
            }
            VertiportThroughput { vertiport: id.clone(), departures, arrivals }
        })
        .collect();

    let pax: u32 = out.flights.iter().map(|f| f.pax).sum();
    let seats = out.flights.len() as f64 * f64::from(out.seats);
    Ok(MetricsSummary {
        fleet_size: out.fleet_size,
        horizon_h: horizon.as_hours(),
        delay: passenger_delays(&out.passengers, horizon, include_unserved),
        flights: out.flights.len(),
        passenger_flights: count(FlightKind::Passenger),
        repositioning_flights: out.flights.iter().filter(|f| f.kind.is_repositioning()).count(),
        space_repositioning_flights: count(FlightKind::SpaceRepositioning),
        demand_repositioning_flights: count(FlightKind::DemandRepositioning),
        network_hours: utilization.network,
        per_aircraft_hours: utilization.per_aircraft,
        rpm: ra.rpm,
        asm: ra.asm,
        rpm_asm: ra.ratio,
        rpm_asm_defined: ra.ratio_defined,
        load_factor: if seats > 0.0 { f64::from(pax) / seats } else { 0.0 },
        energy,
        charge_sessions: out.charges.len(),
        avg_charge_session_min: mean(&sessions),
        avg_idle_interval_min: mean(&idles),
        avg_cruise_min_per_flight: mean(&cruise),
        throughput,
    })
}

/// One row per aircraft plus a `network` row.
pub fn write_utilization_csv<W: io::Write>(u: &Utilization, writer: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["aircraft".to_owned()];
    header.extend(Category::ALL.iter().map(|c| format!("{}_h", c.name())));
    out.write_record(&header)?;
    let row = |label: String, h: &CategoryHours| {
        let mut r = vec![label];
        r.extend(Category::ALL.iter().map(|&c| format!("{:.6}", h.get(c))));
        r
    };
    for (a, h) in u.per_aircraft.iter().enumerate() {
        out.write_record(row(a.to_string(), h))?;
    }
    out.write_record(row("network".to_owned(), &u.network))?;
    out.flush()?;
    Ok(())
}
