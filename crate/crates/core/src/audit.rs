//! Post-run integrity checks. Resource and process checks replay the event
//! log; the rest cross-examine the flight, passenger and charge records.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::energy::PhaseKind;
use crate::fleet::{Process, Segment, SimulationOutput, SOC_EPSILON, TRANSITION};
use crate::kernel::{log_kind, Capacity, SimTime};
use crate::metrics::utilization_breakdown;

/// Tolerance on SoC and energy closure, in percentage points.
const LEDGER_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub check: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub checks_run: Vec<&'static str>,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn failures(&self, check: &str) -> usize {
        self.violations.iter().filter(|v| v.check == check).count()
    }

    fn run(&mut self, check: &'static str, messages: Vec<String>) {
        self.checks_run.push(check);
        self.violations.extend(messages.into_iter().map(|message| Violation { check, message }));
    }
}

pub const CLOCK: &str = "clock_monotone";
pub const CAPACITY: &str = "resource_capacity";
pub const TLOF: &str = "tlof_exclusivity";
pub const TRANSITIONS: &str = "legal_transitions";
pub const REQUESTS: &str = "requests_settled";
pub const PASSENGERS: &str = "passenger_conservation";
pub const ENERGY: &str = "energy_ledger";
pub const RESERVE: &str = "landing_reserve";
pub const PARTITION: &str = "utilization_partition";

/// Runs every check. Log-based checks are skipped when the run kept no log.
pub fn audit(out: &SimulationOutput) -> AuditReport {
    let mut report = AuditReport::default();
    if out.log.is_enabled() {
        report.run(CLOCK, clock(out));
        report.run(CAPACITY, capacity(out));
        report.run(TRANSITIONS, transitions(out));
    }
    report.run(TLOF, tlof(out));
    report.run(REQUESTS, requests(out));
    report.run(PASSENGERS, passengers(out));
    report.run(ENERGY, energy(out));
    report.run(RESERVE, reserve(out));
    report.run(PARTITION, partition(out));
    report
}

fn clock(out: &SimulationOutput) -> Vec<String> {
    out.log
        .entries()
        .windows(2)
        .filter(|w| w[1].time_ms < w[0].time_ms)
        .map(|w| format!("entry {} at {} ms follows {} ms", w[1].sequence, w[1].time_ms, w[0].time_ms))
        .collect()
}

fn field<'a>(detail: &'a str, key: &str) -> Option<&'a str> {
    detail.split_whitespace().find_map(|t| t.strip_prefix(key)?.strip_prefix('='))
}

fn capacity(out: &SimulationOutput) -> Vec<String> {
    let mut holders = vec![0i64; out.resources.len()];
    let mut bad = Vec::new();
    for e in out.log.entries() {
        let delta = match e.kind {
            log_kind::GRANT => 1,
            log_kind::RELEASE => -1,
            _ => continue,
        };
        let Some(r) = field(&e.detail, "res").and_then(|r| r.parse::<usize>().ok()).filter(|&r| r < holders.len())
        else {
            bad.push(format!("entry {}: unreadable resource in '{}'", e.sequence, e.detail));
            continue;
        };
        holders[r] += delta;
        let info = &out.resources[r];
        if holders[r] < 0 {
            bad.push(format!("{} released more often than granted at {} ms", info.name, e.time_ms));
        }
        if let Capacity::Finite(c) = info.capacity {
            if holders[r] > i64::from(c) {
                bad.push(format!("{} holds {} > {c} at {} ms", info.name, holders[r], e.time_ms));
            }
        }
    }
    bad
}

fn transitions(out: &SimulationOutput) -> Vec<String> {
    let mut state = vec![Process::Idle; out.fleet_size as usize];
    let mut bad = Vec::new();
    for e in out.log.entries().iter().filter(|e| e.kind == TRANSITION) {
        let parsed =
            e.detail.split_once("->").and_then(|(a, b)| Some((Process::from_name(a)?, Process::from_name(b)?)));
        let Some((from, to)) = parsed else {
            bad.push(format!("entry {}: unreadable transition '{}'", e.sequence, e.detail));
            continue;
        };
        let Some(current) = state.get_mut(e.subject as usize) else {
            bad.push(format!("entry {}: unknown aircraft {}", e.sequence, e.subject));
            continue;
        };
        if *current != from {
            bad.push(format!("aircraft {} logged {from}->{to} while {current}", e.subject));
        }
        if !from.can_become(to) {
            bad.push(format!("aircraft {} made illegal move {from}->{to} at {} ms", e.subject, e.time_ms));
        }
        *current = to;
    }
    bad
}

/// TLOF occupancy windows rebuilt from flight records: taxi-out plus the
/// hover climb and climb transition, and the descent transition plus hover
/// descent on arrival.
fn tlof(out: &SimulationOutput) -> Vec<String> {
    let seg = |f: &crate::fleet::FlightRecord, p: PhaseKind| f.segment_s[Segment::Phase(p).index()];
    let mut windows: BTreeMap<usize, Vec<(SimTime, SimTime, u32)>> = BTreeMap::new();
    for f in &out.flights {
        let climb = SimTime::from_secs(seg(f, PhaseKind::HoverClimb) + seg(f, PhaseKind::ClimbTransition));
        windows.entry(f.origin).or_default().push((f.pushback, f.liftoff + climb, f.id));
        let descent = SimTime::from_secs(seg(f, PhaseKind::DescentTransition) + seg(f, PhaseKind::HoverDescent));
        windows.entry(f.destination).or_default().push((f.touchdown.saturating_sub(descent), f.touchdown, f.id));
    }
    let mut bad = Vec::new();
    for (v, mut w) in windows {
        let groups = out.tlof_groups.get(v).copied().unwrap_or(1);
        w.sort();
        // Sweep: count open windows at every start.
        let mut open: Vec<SimTime> = Vec::new();
        for (start, end, id) in w {
            open.retain(|&e| e > start);
            open.push(end);
            if open.len() > groups {
                bad.push(format!(
                    "vertiport {v}: flight {id} uses a TLOF at {start} with {} already busy",
                    open.len() - 1
                ));
            }
        }
    }
    bad
}

fn requests(out: &SimulationOutput) -> Vec<String> {
    let c = out.counters;
    let mut bad = Vec::new();
    if c.granted + c.cancelled != c.issued {
        bad.push(format!("issued {} != granted {} + cancelled {}", c.issued, c.granted, c.cancelled));
    }
    if out.pending_requests != 0 {
        bad.push(format!("{} requests still pending at the end", out.pending_requests));
    }
    bad
}

fn passengers(out: &SimulationOutput) -> Vec<String> {
    let mut bad = Vec::new();
    let mut aboard = vec![0u32; out.flights.len()];
    let by_id: BTreeMap<u32, usize> = out.flights.iter().enumerate().map(|(i, f)| (f.id, i)).collect();
    for p in &out.passengers {
        let Some(fid) = p.flight else {
            if p.boarding.is_some() || p.departure.is_some() || p.landing.is_some() {
                bad.push(format!("passenger {} has times but no flight", p.id));
            }
            continue;
        };
        let Some(&i) = by_id.get(&fid) else {
            bad.push(format!("passenger {} on unknown or unfinished flight {fid}", p.id));
            continue;
        };
        let f = &out.flights[i];
        aboard[i] += 1;
        if (p.origin, p.destination) != (f.origin, f.destination) {
            bad.push(format!("passenger {} rode flight {fid} on the wrong leg", p.id));
        }
        if p.departure != Some(f.liftoff) || p.landing != Some(f.touchdown) {
            bad.push(format!("passenger {} times disagree with flight {fid}", p.id));
        }
        if p.boarding.is_none_or(|b| b < p.arrival || b > f.pushback) {
            bad.push(format!("passenger {} boarded outside [arrival, pushback]", p.id));
        }
    }
    for (f, &n) in out.flights.iter().zip(&aboard) {
        if n != f.pax {
            bad.push(format!("flight {} lists {} pax but carried {n}", f.id, f.pax));
        }
    }
    let boarded = out.passengers.iter().filter(|p| p.flight.is_some()).count();
    let waiting = out.passengers.len() - boarded;
    let delivered: u32 = out.flights.iter().map(|f| f.pax).sum();
    if boarded != delivered as usize || boarded + waiting != out.passengers.len() {
        bad.push(format!("{} arrived, {boarded} boarded, {delivered} delivered", out.passengers.len()));
    }
    bad
}

/// Per aircraft: start SoC minus flight draws plus charge gains equals the
/// final SoC, and each record is internally consistent.
fn energy(out: &SimulationOutput) -> Vec<String> {
    let pct = |kwh: f64| 100.0 * kwh / out.battery_kwh;
    let mut bad = Vec::new();
    let mut soc = out.initial_soc.clone();
    let mut events: Vec<(SimTime, u8, usize)> = Vec::new();
    for (i, f) in out.flights.iter().enumerate() {
        let phases: f64 = f.segment_kwh.iter().sum();
        if (phases - f.energy_kwh).abs() > 1e-9 * f.energy_kwh.max(1.0) {
            bad.push(format!("flight {}: phase energies {phases} != total {}", f.id, f.energy_kwh));
        }
        if (f.soc_before - pct(f.energy_kwh) - f.soc_after).abs() > LEDGER_TOLERANCE {
            bad.push(format!("flight {}: soc {} - draw != {}", f.id, f.soc_before, f.soc_after));
        }
        if f.segment_kwh[Segment::Holding.index()] != 0.0 {
            bad.push(format!("flight {}: holding drew energy", f.id));
        }
        events.push((f.pushback, 0, i));
    }
    for (i, c) in out.charges.iter().enumerate() {
        if c.soc_to < c.soc_from || c.battery_kwh > c.grid_kwh + 1e-9 {
            bad.push(format!("charge {i} on aircraft {} is not a gain", c.aircraft));
        }
        if (pct(c.battery_kwh) - (c.soc_to - c.soc_from)).abs() > LEDGER_TOLERANCE {
            bad.push(format!("charge {i}: battery energy disagrees with the SoC gain"));
        }
        events.push((c.start, 1, i));
    }
    events.sort();
    for (_, kind, i) in events {
        if kind == 0 {
            let f = &out.flights[i];
            let a = f.aircraft as usize;
            if (soc[a] - f.soc_before).abs() > LEDGER_TOLERANCE {
                bad.push(format!("flight {} starts at soc {} but aircraft {a} had {}", f.id, f.soc_before, soc[a]));
            }
            soc[a] = f.soc_after;
        } else {
            let c = &out.charges[i];
            let a = c.aircraft as usize;
            if (soc[a] - c.soc_from).abs() > LEDGER_TOLERANCE {
                bad.push(format!("charge on aircraft {a} starts at {} but it had {}", c.soc_from, soc[a]));
            }
            soc[a] = c.soc_to;
        }
    }
    for (a, (&ledger, &actual)) in soc.iter().zip(&out.final_soc).enumerate() {
        if (ledger - actual).abs() > LEDGER_TOLERANCE {
            bad.push(format!("aircraft {a}: ledger ends at {ledger}, aircraft at {actual}"));
        }
        if actual < 0.0 {
            bad.push(format!("aircraft {a}: negative soc {actual}"));
        }
    }
    bad
}

fn reserve(out: &SimulationOutput) -> Vec<String> {
    out.flights
        .iter()
        .filter(|f| f.soc_after < out.reserve_soc - SOC_EPSILON)
        .map(|f| format!("flight {} landed at {:.4}% soc", f.id, f.soc_after))
        .collect()
}

fn partition(out: &SimulationOutput) -> Vec<String> {
    match utilization_breakdown(&out.intervals, out.fleet_size, out.horizon) {
        Ok(u) => {
            let total: u64 = u.network_ms.iter().sum();
            let expected = u64::from(out.fleet_size) * out.horizon.as_ms();
            if total == expected {
                Vec::new()
            } else {
                vec![format!("categories cover {total} ms, fleet-hours are {expected} ms")]
            }
        }
        Err(e) => vec![e.to_string()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charging::ChargerSpec;
    use crate::demand::{generate_arrivals, DemandProfile};
    use crate::energy::{AircraftParams, FlightProfile};
    use crate::fleet::{simulate, PolicyConfig, SimulationSetup};
    use crate::topology::{CloverGeometry, Network, Position, SiteSpec};

    fn run(fleet: usize, seed: u64) -> SimulationOutput {
        let pads = fleet.div_ceil(2) as u32;
        let site = |id: &str, x: f64| SiteSpec {
            id: id.into(),
            site: Position { x_ft: x, y_ft: 0.0, alt_ft: 0.0 },
            pads,
            tlofs: 1,
            chargers: pads,
        };
        let network = Network::build(
            &[site("A", 0.0), site("B", 24.0 * 5280.0)],
            &[(0, 1, 24.0)],
            &CloverGeometry::default(),
            1.0,
        )
        .unwrap();
        let setup = SimulationSetup {
            network,
            initial_placement: (0..fleet).map(|i| i * 2 / fleet).collect(),
            aircraft: AircraftParams::default(),
            profile: FlightProfile::default(),
            battery_kwh: 160.0,
            initial_soc: 100.0,
            charger: ChargerSpec::default().calibrate(160.0).unwrap(),
            policy: PolicyConfig::default(),
            horizon: SimTime::from_hours(24.0),
            record_log: true,
        };
        simulate(&setup, &generate_arrivals(&DemandProfile::reconstructed(), seed)).unwrap()
    }

    #[test]
    fn daily_runs_are_clean() {
        for fleet in [8, 14, 20] {
            let report = audit(&run(fleet, 11));
            assert!(report.is_clean(), "fleet {fleet}: {:?}", &report.violations[..report.violations.len().min(5)]);
            assert_eq!(report.checks_run.len(), 9);
        }
    }

    #[test]
    fn tampering_is_caught() {
        let clean = run(14, 5);

        let mut out = clean.clone();
        out.flights[3].soc_after -= 1.0;
        let r = audit(&out);
        assert!(r.failures(ENERGY) > 0);

        let mut out = clean.clone();
        out.flights[0].soc_after = 19.0;
        assert!(audit(&out).failures(RESERVE) > 0);

        let mut out = clean.clone();
        let tight = out.resources.iter().position(|r| r.name.ends_with("/pads")).unwrap();
        out.resources[tight].capacity = Capacity::Finite(1);
        assert!(audit(&out).failures(CAPACITY) > 0);

        let mut out = clean.clone();
        let f = out.flights.iter().position(|f| f.pax > 0).unwrap();
        out.flights[f].pax += 1;
        assert!(audit(&out).failures(PASSENGERS) > 0);

        let mut out = clean.clone();
        let a = out.flights.iter().find(|f| f.origin == 0).unwrap().clone();
        let mut b = a.clone();
        b.id = 9_999;
        b.pushback = a.pushback + SimTime::from_secs(10.0);
        b.liftoff = a.liftoff + SimTime::from_secs(10.0);
        b.pax = 0;
        out.flights.push(b);
        assert!(audit(&out).failures(TLOF) > 0);

        let mut out = clean;
        out.intervals.remove(0);
        assert!(audit(&out).failures(PARTITION) > 0);
    }
}
