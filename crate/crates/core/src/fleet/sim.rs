//! The fleet simulation: passengers, aircraft and vertiport resources driven
//! by the discrete-event kernel.
//!
//! Landing takes a pad, then the approach fix, then an atomic batch of TLOF
//! group, departure fix and taxi path. Departure takes an atomic batch of taxi
//! path, TLOF group and departure fix before pushback. Cruise walks a chain of
//! capacity-one waypoints, reserving one ahead.

use std::collections::BTreeMap;

use thiserror::Error;

use super::policy::PolicyConfig;
use super::process::Process;
use super::records::{
    ChargeRecord, FlightKind, FlightRecord, PassengerRecord, ProcessInterval, Segment, AIRBORNE_SEGMENTS,
};
use super::waiting::WaitingRoom;
use crate::charging::ChargerModel;
use crate::demand::PassengerRequest;
use crate::energy::{mission_energy, AircraftParams, EnergyError, FlightProfile, MissionEnergy, PhaseKind};
use crate::kernel::{
    Capacity, Engine, EntityId, EventLog, Grant, KernelError, Payload, RequestCounters, Reservation, ResourceId,
    SimTime,
};
use crate::topology::{shortest_route, Network, TopologyError};

/// Log kind for process changes; detail is `from->to`.
pub const TRANSITION: &str = "transition";

/// Hard stop against runaway event loops.
const MAX_EVENTS: u64 = 50_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("passenger {passenger} references unknown vertiport '{vertiport}'")]
    UnknownVertiport { passenger: u32, vertiport: String },
    #[error("no leg between {0} and {1}")]
    NoLeg(String, String),
    #[error("{aircraft} aircraft start at {vertiport} but it has {pads} pads")]
    InitialOverflow { vertiport: String, aircraft: usize, pads: u32 },
    #[error("initial placement lists {got} aircraft for a fleet of {fleet}")]
    PlacementSize { got: usize, fleet: u32 },
    #[error("leg energy: {0}")]
    Energy(#[from] EnergyError),
    #[error("topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("kernel fault at {at}: {source}")]
    Kernel { at: SimTime, source: KernelError },
    #[error("aircraft {aircraft} at {at}: illegal transition {from} -> {to}")]
    IllegalTransition { aircraft: u32, at: SimTime, from: Process, to: Process },
    #[error("internal invariant broken at {at}: {message}")]
    Internal { at: SimTime, message: String },
    #[error("run exceeded {0} events")]
    Runaway(u64),
}

#[derive(Clone, Debug)]
pub struct SimulationSetup {
    pub network: Network,
    /// Vertiport index each aircraft starts at.
    pub initial_placement: Vec<usize>,
    pub aircraft: AircraftParams,
    pub profile: FlightProfile,
    pub battery_kwh: f64,
    pub initial_soc: f64,
    pub charger: ChargerModel,
    pub policy: PolicyConfig,
    pub horizon: SimTime,
    pub record_log: bool,
}

impl SimulationSetup {
    pub fn fleet_size(&self) -> u32 {
        self.initial_placement.len() as u32
    }
}

#[derive(Clone, Debug)]
pub struct ResourceInfo {
    pub name: String,
    pub capacity: Capacity,
}

#[derive(Clone, Debug)]
pub struct SimulationOutput {
    pub vertiport_ids: Vec<String>,
    pub fleet_size: u32,
    pub horizon: SimTime,
    pub end_time: SimTime,
    pub battery_kwh: f64,
    pub seats: u32,
    pub flights: Vec<FlightRecord>,
    pub passengers: Vec<PassengerRecord>,
    pub intervals: Vec<ProcessInterval>,
    pub charges: Vec<ChargeRecord>,
    pub initial_soc: Vec<f64>,
    pub final_soc: Vec<f64>,
    pub resources: Vec<ResourceInfo>,
    /// Mutually exclusive TLOF groups per vertiport.
    pub tlof_groups: Vec<usize>,
    pub counters: RequestCounters,
    pub pending_requests: usize,
    pub events_processed: u64,
    pub log: EventLog,
    /// Full-load SoC draw per (origin, destination) leg.
    pub leg_soc: Vec<((usize, usize), f64)>,
    pub reserve_soc: f64,
}

#[derive(Clone, Debug, PartialEq)]
enum Ev {
    PassengerArrival(u32),
    DispatchCheck(usize),
    Timer(u32),
    Granted(Grant),
}

impl From<Grant> for Ev {
    fn from(g: Grant) -> Self {
        Ev::Granted(g)
    }
}

impl Payload for Ev {
    fn kind(&self) -> &'static str {
        match self {
            Ev::PassengerArrival(_) => "passenger_arrival",
            Ev::DispatchCheck(_) => "dispatch_check",
            Ev::Timer(_) => "phase_complete",
            Ev::Granted(_) => "reservation_granted",
        }
    }

    fn subject(&self) -> u64 {
        match self {
            Ev::PassengerArrival(p) => u64::from(*p),
            Ev::DispatchCheck(v) => *v as u64,
            Ev::Timer(a) => u64::from(*a),
            Ev::Granted(g) => u64::from(g.entity.0),
        }
    }

    fn detail(&self) -> String {
        match self {
            Ev::Granted(g) => format!("req={} tag={}", g.request.0, g.tag),
            _ => String::new(),
        }
    }
}

mod tag {
    pub const PAD: u64 = 1;
    pub const APPROACH: u64 = 2;
    pub const LANDING: u64 = 3;
    pub const DEPARTURE: u64 = 4;
    pub const CHAIN: u64 = 5;
    pub const CHARGER: u64 = 6;
}

struct Leg {
    distance_mi: f64,
    /// Missions indexed by occupied seats.
    missions: Vec<MissionEnergy>,
    full_soc: f64,
    /// Cruise chain resources: climb exit, waypoints, destination holding.
    chain: Vec<ResourceId>,
}

struct VertiportRes {
    pads: u32,
    pad_pool: ResourceId,
    chargers: ResourceId,
    approach: ResourceId,
    departure: ResourceId,
    holding: ResourceId,
    groups: Vec<ResourceId>,
    /// `taxi[pad][group]`: taxi node and links between the pad and that group's TLOF.
    taxi: Vec<Vec<Vec<ResourceId>>>,
    /// Taxi time per pad (same for every TLOF in the clover).
    taxi_time: Vec<SimTime>,
}

struct Job {
    kind: FlightKind,
    origin: usize,
    destination: usize,
    passengers: Vec<u32>,
    flight: FlightRecord,
}

struct Aircraft {
    id: u32,
    vertiport: usize,
    process: Process,
    since: SimTime,
    soc: f64,
    pad: Option<usize>,
    job: Option<Job>,
    /// When it last became free to take a job.
    ready_at: SimTime,
    boarding_started: Option<SimTime>,
    charge_target: Option<f64>,
    charge_start: SimTime,
    charge_from: f64,
    group: usize,
    chain_pos: usize,
    climbing: bool,
    outbound_taxi: bool,
    timer_pending: bool,
}

struct Sim<'a> {
    setup: &'a SimulationSetup,
    engine: Engine<Ev>,
    legs: Vec<Vec<Option<Leg>>>,
    max_leg_soc: Vec<f64>,
    vps: Vec<VertiportRes>,
    pad_occupant: Vec<Vec<Option<u32>>>,
    aircraft: Vec<Aircraft>,
    rooms: Vec<WaitingRoom>,
    passengers: Vec<PassengerRecord>,
    flights: Vec<FlightRecord>,
    intervals: Vec<ProcessInterval>,
    charges: Vec<ChargeRecord>,
    inbound_demand: Vec<usize>,
    inbound_unrequested: Vec<usize>,
    pending_space: Vec<usize>,
    next_flight: u32,
    dirty: bool,
}

/// Runs one scenario to completion: every passenger arrival is processed,
/// dispatch stops at the horizon and in-flight work drains afterwards.
pub fn simulate(setup: &SimulationSetup, arrivals: &[PassengerRequest]) -> Result<SimulationOutput, SimError> {
    let mut sim = Sim::new(setup, arrivals)?;
    let events = sim.run()?;
    Ok(sim.finish(events))
}

fn kernel(at: SimTime) -> impl Fn(KernelError) -> SimError {
    move |source| SimError::Kernel { at, source }
}

impl<'a> Sim<'a> {
    fn new(setup: &'a SimulationSetup, arrivals: &[PassengerRequest]) -> Result<Self, SimError> {
        let net = &setup.network;
        let n = net.vertiports.len();
        let mut engine: Engine<Ev> = Engine::new(setup.record_log);

        let mut vps = Vec::with_capacity(n);
        for layout in &net.vertiports {
            let id = &layout.id;
            let pads = layout.pads.len() as u32;
            let pad_pool = engine.add_resource(format!("{id}/pads"), Capacity::Finite(pads));
            let chargers = engine.add_resource(format!("{id}/chargers"), Capacity::Finite(layout.chargers.max(1)));
            let approach = engine.add_resource(format!("{id}/approach_fix"), Capacity::Finite(1));
            let departure = engine.add_resource(format!("{id}/departure_fix"), Capacity::Finite(1));
            let holding = engine.add_resource(format!("{id}/holding"), Capacity::Unbounded);
            let groups: Vec<ResourceId> = (0..layout.exclusivity_groups.len())
                .map(|g| engine.add_resource(format!("{id}/tlof_group{g}"), Capacity::Finite(1)))
                .collect();
            let mut node_res = BTreeMap::new();
            let mut edge_res = BTreeMap::new();
            let mut taxi = Vec::with_capacity(layout.pads.len());
            let mut taxi_time = Vec::with_capacity(layout.pads.len());
            for &pad in &layout.pads {
                let mut per_group = Vec::new();
                let mut longest = 0.0f64;
                for group in &layout.exclusivity_groups {
                    let route = shortest_route(&net.graph, pad, group[0])?;
                    longest = longest.max(route.length_ft);
                    let mut members = Vec::new();
                    for &node in &route.nodes[1..route.nodes.len() - 1] {
                        let r = *node_res.entry(node).or_insert_with(|| {
                            engine.add_resource(net.graph.node(node).label.clone(), Capacity::Finite(1))
                        });
                        members.push(r);
                    }
                    for &e in &route.edges {
                        let r = *edge_res.entry(e).or_insert_with(|| {
                            let edge = net.graph.edge(e);
                            let name = format!("{}~{}", net.graph.node(edge.a).label, net.graph.node(edge.b).label);
                            engine.add_resource(name, Capacity::Finite(1))
                        });
                        members.push(r);
                    }
                    per_group.push(members);
                }
                taxi.push(per_group);
                taxi_time.push(SimTime::from_secs(longest / setup.policy.taxi_speed_ft_s));
            }
            vps.push(VertiportRes { pads, pad_pool, chargers, approach, departure, holding, groups, taxi, taxi_time });
        }

        let mut legs: Vec<Vec<Option<Leg>>> = (0..n).map(|_| (0..n).map(|_| None).collect()).collect();
        for route in &net.routes {
            let o = net.vertiport_index(&route.origin).expect("routes connect known vertiports");
            let d = net.vertiport_index(&route.destination).expect("routes connect known vertiports");
            let missions = (0..=setup.aircraft.seats)
                .map(|s| mission_energy(&setup.aircraft, &setup.profile, route.distance_mi, s))
                .collect::<Result<Vec<_>, _>>()?;
            let full_soc = missions[setup.aircraft.seats as usize].soc_drop(setup.battery_kwh);
            let mut chain = Vec::with_capacity(route.nodes.len());
            for &node in &route.nodes[..route.nodes.len() - 1] {
                chain.push(engine.add_resource(net.graph.node(node).label.clone(), Capacity::Finite(1)));
            }
            chain.push(vps[d].holding);
            legs[o][d] = Some(Leg { distance_mi: route.distance_mi, missions, full_soc, chain });
        }
        let max_leg_soc: Vec<f64> =
            legs.iter().map(|row| row.iter().flatten().map(|l| l.full_soc).fold(0.0, f64::max)).collect();

        if setup.initial_placement.iter().any(|&v| v >= n) {
            return Err(SimError::Internal {
                at: SimTime::ZERO,
                message: "placement names a missing vertiport".into(),
            });
        }
        let mut aircraft = Vec::with_capacity(setup.initial_placement.len());
        let mut pad_occupant: Vec<Vec<Option<u32>>> = vps.iter().map(|v| vec![None; v.pads as usize]).collect();
        for (i, &v) in setup.initial_placement.iter().enumerate() {
            let id = i as u32;
            let count = setup.initial_placement.iter().filter(|&&p| p == v).count();
            if count > vps[v].pads as usize {
                return Err(SimError::InitialOverflow {
                    vertiport: net.vertiports[v].id.clone(),
                    aircraft: count,
                    pads: vps[v].pads,
                });
            }
            let r = engine.reserve(EntityId(id), vps[v].pad_pool, tag::PAD).map_err(kernel(SimTime::ZERO))?;
            debug_assert!(r.is_granted());
            let pad = pad_occupant[v].iter().position(Option::is_none).expect("pad count checked above");
            pad_occupant[v][pad] = Some(id);
            aircraft.push(Aircraft {
                id,
                vertiport: v,
                process: Process::Idle,
                since: SimTime::ZERO,
                soc: setup.initial_soc,
                pad: Some(pad),
                job: None,
                ready_at: SimTime::ZERO,
                boarding_started: None,
                charge_target: None,
                charge_start: SimTime::ZERO,
                charge_from: 0.0,
                group: 0,
                chain_pos: 0,
                climbing: false,
                outbound_taxi: false,
                timer_pending: false,
            });
        }

        let mut passengers = Vec::with_capacity(arrivals.len());
        for (i, p) in arrivals.iter().enumerate() {
            let find = |name: &str| {
                net.vertiport_index(name)
                    .ok_or_else(|| SimError::UnknownVertiport { passenger: p.id, vertiport: name.to_owned() })
            };
            let (o, d) = (find(&p.origin)?, find(&p.destination)?);
            if legs[o][d].is_none() {
                return Err(SimError::NoLeg(p.origin.clone(), p.destination.clone()));
            }
            passengers.push(PassengerRecord {
                id: p.id,
                origin: o,
                destination: d,
                arrival: p.arrival,
                boarding: None,
                departure: None,
                landing: None,
                flight: None,
            });
            engine.schedule(p.arrival, Ev::PassengerArrival(i as u32)).map_err(kernel(SimTime::ZERO))?;
        }

        Ok(Sim {
            setup,
            engine,
            legs,
            max_leg_soc,
            vps,
            pad_occupant,
            aircraft,
            rooms: vec![WaitingRoom::default(); n],
            passengers,
            flights: Vec::new(),
            intervals: Vec::new(),
            charges: Vec::new(),
            inbound_demand: vec![0; n],
            inbound_unrequested: vec![0; n],
            pending_space: vec![0; n],
            next_flight: 0,
            dirty: true,
        })
    }

    fn now(&self) -> SimTime {
        self.engine.now()
    }

    fn policy(&self) -> &PolicyConfig {
        &self.setup.policy
    }

    fn before_horizon(&self) -> bool {
        self.now() < self.setup.horizon
    }

    fn leg(&self, o: usize, d: usize) -> &Leg {
        self.legs[o][d].as_ref().expect("legs are checked before use")
    }

    fn run(&mut self) -> Result<u64, SimError> {
        let mut events = 0u64;
        loop {
            if self.dirty {
                self.dirty = false;
                self.service_all()?;
            }
            let Some(ev) = self.engine.advance() else { break };
            events += 1;
            if events > MAX_EVENTS {
                return Err(SimError::Runaway(MAX_EVENTS));
            }
            match ev.payload {
                Ev::PassengerArrival(p) => self.on_passenger(p)?,
                Ev::DispatchCheck(_) => self.dirty = true,
                Ev::Timer(a) => {
                    self.aircraft[a as usize].timer_pending = false;
                    self.on_timer(a)?;
                }
                Ev::Granted(g) => self.on_grant(g.entity.0, g.tag)?,
            }
        }
        Ok(events)
    }

    fn finish(mut self, events: u64) -> SimulationOutput {
        let end = self.now().max(self.setup.horizon);
        for a in &self.aircraft {
            self.intervals.push(ProcessInterval { aircraft: a.id, process: a.process, start: a.since, end });
        }
        self.intervals.sort_by_key(|i| (i.aircraft, i.start, i.end));
        let mut leg_soc = Vec::new();
        for (o, row) in self.legs.iter().enumerate() {
            for (d, leg) in row.iter().enumerate() {
                if let Some(l) = leg {
                    leg_soc.push(((o, d), l.full_soc));
                }
            }
        }
        SimulationOutput {
            vertiport_ids: self.setup.network.vertiports.iter().map(|v| v.id.clone()).collect(),
            fleet_size: self.setup.fleet_size(),
            horizon: self.setup.horizon,
            end_time: self.now(),
            battery_kwh: self.setup.battery_kwh,
            seats: self.setup.aircraft.seats,
            flights: self.flights,
            passengers: self.passengers,
            intervals: self.intervals,
            charges: self.charges,
            initial_soc: vec![self.setup.initial_soc; self.aircraft.len()],
            final_soc: self.aircraft.iter().map(|a| a.soc).collect(),
            resources: self
                .engine
                .resources()
                .map(|(_, r)| ResourceInfo { name: r.name().to_owned(), capacity: r.capacity() })
                .collect(),
            tlof_groups: self.vps.iter().map(|v| v.groups.len()).collect(),
            counters: self.engine.counters(),
            pending_requests: self.engine.pending_requests(),
            events_processed: events,
            log: self.engine.take_log(),
            leg_soc,
            reserve_soc: self.setup.policy.reserve_soc,
        }
    }

    // ---- bookkeeping -------------------------------------------------

    fn set_process(&mut self, a: u32, next: Process) -> Result<(), SimError> {
        let now = self.now();
        let ac = &mut self.aircraft[a as usize];
        let prev = ac.process;
        if !prev.can_become(next) {
            return Err(SimError::IllegalTransition { aircraft: a, at: now, from: prev, to: next });
        }
        if prev.is_airborne() {
            if let (Some(job), Some(seg)) = (ac.job.as_mut(), segment_of(prev)) {
                job.flight.segment_s[seg.index()] += (now - ac.since).as_secs();
            }
        }
        if now > ac.since {
            self.intervals.push(ProcessInterval { aircraft: a, process: prev, start: ac.since, end: now });
        }
        ac.process = next;
        ac.since = now;
        self.engine.note(TRANSITION, u64::from(a), || format!("{prev}->{next}"));
        Ok(())
    }

    fn start_timer(&mut self, a: u32, delay: SimTime) -> Result<(), SimError> {
        let ac = &mut self.aircraft[a as usize];
        if ac.timer_pending {
            return Err(SimError::Internal { at: self.engine.now(), message: format!("aircraft {a} double timer") });
        }
        ac.timer_pending = true;
        self.engine.schedule_in(delay, Ev::Timer(a));
        Ok(())
    }

    /// Reserves and funnels immediate grants through the event queue so every
    /// grant is handled the same way.
    fn reserve(&mut self, a: u32, members: &[ResourceId], tag: u64) -> Result<(), SimError> {
        let now = self.now();
        let r = self.engine.reserve_all(EntityId(a), members, 0, tag).map_err(kernel(now))?;
        if let Reservation::Granted(request) = r {
            self.engine.schedule_in(SimTime::ZERO, Ev::Granted(Grant { request, entity: EntityId(a), tag }));
        }
        Ok(())
    }

    fn release(&mut self, a: u32, res: ResourceId) -> Result<(), SimError> {
        let now = self.now();
        self.engine.release(EntityId(a), res).map_err(kernel(now))
    }

    fn deduct(&mut self, a: u32, phase: PhaseKind) {
        let ac = &mut self.aircraft[a as usize];
        let job = ac.job.as_mut().expect("airborne aircraft carry a job");
        let leg = self.legs[job.origin][job.destination].as_ref().expect("job legs exist");
        let kwh = leg.missions[job.flight.seats as usize].phase(phase).energy_kwh;
        job.flight.segment_kwh[Segment::Phase(phase).index()] += kwh;
        job.flight.energy_kwh += kwh;
        ac.soc -= 100.0 * kwh / self.setup.battery_kwh;
    }

    fn phase_time(&self, a: u32, phase: PhaseKind) -> SimTime {
        let job = self.aircraft[a as usize].job.as_ref().expect("airborne aircraft carry a job");
        let mission = &self.leg(job.origin, job.destination).missions[job.flight.seats as usize];
        SimTime::from_secs(mission.phase(phase).duration_s)
    }

    // ---- passengers and dispatch ------------------------------------

    fn on_passenger(&mut self, p: u32) -> Result<(), SimError> {
        let rec = &self.passengers[p as usize];
        let (o, d, t) = (rec.origin, rec.destination, rec.arrival);
        self.rooms[o].push(d, p, t);
        let check = t + self.policy().wait_threshold();
        self.engine.schedule(check, Ev::DispatchCheck(o)).map_err(kernel(t))?;
        self.dirty = true;
        Ok(())
    }

    fn service_all(&mut self) -> Result<(), SimError> {
        for v in 0..self.vps.len() {
            self.try_dispatch(v)?;
        }
        for v in 0..self.vps.len() {
            self.space_reposition(v)?;
        }
        Ok(())
    }

    fn is_free(&self, a: &Aircraft, v: usize) -> bool {
        a.vertiport == v && a.job.is_none() && matches!(a.process, Process::Idle | Process::PostCharge)
    }

    fn due(&self, v: usize, d: usize) -> bool {
        self.policy().dispatch_due(self.rooms[v].len(d), self.rooms[v].oldest(d), self.now())
    }

    fn try_dispatch(&mut self, v: usize) -> Result<(), SimError> {
        if !self.before_horizon() {
            return Ok(());
        }
        let mut starved = false;
        for d in self.rooms[v].destinations_by_age() {
            while self.due(v, d) {
                let need = self.leg(v, d).full_soc;
                let pick = self
                    .aircraft
                    .iter()
                    .filter(|a| self.is_free(a, v) && self.policy().can_fly(a.soc, need))
                    .min_by_key(|a| (a.ready_at, a.id))
                    .map(|a| a.id);
                match pick {
                    Some(a) => {
                        let cap = self.policy().vehicle_capacity as usize;
                        let pax = self.rooms[v].take(d, cap);
                        self.assign(a, FlightKind::Passenger, d, pax)?;
                    }
                    None => {
                        self.charge_stranded(v, need)?;
                        starved = true;
                        break;
                    }
                }
            }
        }
        if starved {
            self.demand_reposition(v)?;
        }
        Ok(())
    }

    /// Idle aircraft that cannot fly the requested leg go to charge.
    fn charge_stranded(&mut self, v: usize, need: f64) -> Result<(), SimError> {
        let stranded: Vec<u32> = self
            .aircraft
            .iter()
            .filter(|a| a.vertiport == v && a.job.is_none() && a.process == Process::Idle)
            .filter(|a| !self.policy().can_fly(a.soc, need))
            .map(|a| a.id)
            .collect();
        for a in stranded {
            let leg = need.max(self.max_leg_soc[v]);
            let max = self.setup.charger.max_target_soc;
            let target = self.policy().charge_target(self.aircraft[a as usize].soc, leg, max).unwrap_or(max);
            self.begin_charge(a, target)?;
        }
        Ok(())
    }

    fn demand_reposition(&mut self, v: usize) -> Result<(), SimError> {
        if !self.policy().demand_repositioning || !self.before_horizon() {
            return Ok(());
        }
        let cap = self.policy().vehicle_capacity as usize;
        let unmet: usize = self.rooms[v]
            .destinations_by_age()
            .into_iter()
            .filter(|&d| self.due(v, d))
            .map(|d| self.rooms[v].len(d).div_ceil(cap))
            .sum();
        while self.inbound_demand[v] < unmet {
            let mut sources: Vec<(f64, usize)> = (0..self.vps.len())
                .filter(|&u| u != v)
                .filter_map(|u| self.legs[u][v].as_ref().map(|l| (l.distance_mi, u)))
                .collect();
            sources.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut pick = None;
            for (_, u) in sources {
                let need = 2.0 * self.leg(u, v).full_soc;
                pick = self
                    .aircraft
                    .iter()
                    .filter(|a| a.vertiport == u && a.job.is_none() && a.process == Process::Idle)
                    .filter(|a| self.policy().can_fly(a.soc, need))
                    .min_by_key(|a| (a.ready_at, a.id))
                    .map(|a| (a.id, u));
                if pick.is_some() {
                    break;
                }
            }
            let Some((a, u)) = pick else { break };
            let pax = self.rooms[u].take(v, cap);
            self.inbound_demand[v] += 1;
            self.assign(a, FlightKind::DemandRepositioning, v, pax)?;
        }
        Ok(())
    }

    /// Pads at `u` not already spoken for by parked, queued or inbound aircraft.
    fn spare_pads(&self, u: usize) -> i64 {
        let r = self.engine.resource(self.vps[u].pad_pool);
        i64::from(self.vps[u].pads)
            - r.holders().len() as i64
            - r.queue_len() as i64
            - self.inbound_unrequested[u] as i64
    }

    fn space_reposition(&mut self, v: usize) -> Result<(), SimError> {
        if !self.policy().space_repositioning {
            return Ok(());
        }
        let cap = self.policy().vehicle_capacity as usize;
        loop {
            let queued = self.engine.resource(self.vps[v].pad_pool).queue_len();
            if self.pending_space[v] >= queued {
                return Ok(());
            }
            let mut targets: Vec<(f64, usize)> = (0..self.vps.len())
                .filter(|&u| u != v && self.spare_pads(u) > 0)
                .filter_map(|u| self.legs[v][u].as_ref().map(|l| (l.distance_mi, u)))
                .collect();
            targets.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut pick = None;
            for (_, u) in targets {
                let need = self.leg(v, u).full_soc;
                pick = self
                    .aircraft
                    .iter()
                    .filter(|a| a.vertiport == v && a.job.is_none() && a.process == Process::Idle)
                    .filter(|a| self.policy().can_fly(a.soc, need))
                    .min_by_key(|a| (a.ready_at, a.id))
                    .map(|a| (a.id, u));
                if pick.is_some() {
                    break;
                }
            }
            let Some((a, u)) = pick else { return Ok(()) };
            let pax = if self.before_horizon() { self.rooms[v].take(u, cap) } else { Vec::new() };
            self.pending_space[v] += 1;
            self.assign(a, FlightKind::SpaceRepositioning, u, pax)?;
        }
    }

    fn assign(&mut self, a: u32, kind: FlightKind, destination: usize, pax: Vec<u32>) -> Result<(), SimError> {
        let now = self.now();
        let origin = self.aircraft[a as usize].vertiport;
        let id = self.next_flight;
        self.next_flight += 1;
        for &p in &pax {
            let rec = &mut self.passengers[p as usize];
            rec.boarding = Some(now);
            rec.flight = Some(id);
        }
        let ac = &self.aircraft[a as usize];
        let flight = FlightRecord {
            id,
            kind,
            aircraft: a,
            origin,
            destination,
            distance_mi: self.leg(origin, destination).distance_mi,
            pax: pax.len() as u32,
            seats: pax.len() as u32,
            pushback: now,
            liftoff: now,
            touchdown: now,
            parked: now,
            segment_s: [0.0; 8],
            segment_kwh: [0.0; 8],
            energy_kwh: 0.0,
            soc_before: ac.soc,
            soc_after: ac.soc,
        };
        let process = ac.process;
        self.inbound_unrequested[destination] += 1;
        let has_pax = !pax.is_empty();
        let ac = &mut self.aircraft[a as usize];
        ac.job = Some(Job { kind, origin, destination, passengers: pax, flight });
        match process {
            Process::Idle if has_pax => {
                ac.boarding_started = Some(now);
                self.set_process(a, Process::Boarding)?;
                let embark = SimTime::from_minutes(self.policy().embark_min);
                self.start_timer(a, embark)
            }
            Process::Idle => self.begin_pushback(a),
            // Boarding overlaps the post-charge tail; the post-charge timer
            // decides what comes next.
            Process::PostCharge => {
                if has_pax {
                    ac.boarding_started = Some(now);
                }
                Ok(())
            }
            other => Err(SimError::Internal { at: now, message: format!("assigned aircraft {a} while {other}") }),
        }
    }

    // ---- departure -----------------------------------------------------

    fn begin_pushback(&mut self, a: u32) -> Result<(), SimError> {
        self.set_process(a, Process::Pushback)?;
        let ac = &self.aircraft[a as usize];
        let v = ac.vertiport;
        let pad = ac.pad.expect("departing aircraft sit on a pad");
        let group = self.pick_group(v);
        self.aircraft[a as usize].group = group;
        let vp = &self.vps[v];
        let mut members = vp.taxi[pad][group].clone();
        members.push(vp.groups[group]);
        members.push(vp.departure);
        self.reserve(a, &members, tag::DEPARTURE)
    }

    /// TLOF group with the fewest waiting requests, lowest index on ties.
    fn pick_group(&self, v: usize) -> usize {
        let vp = &self.vps[v];
        (0..vp.groups.len())
            .min_by_key(|&g| {
                let r = self.engine.resource(vp.groups[g]);
                (r.holders().len() + r.queue_len(), g)
            })
            .unwrap_or(0)
    }

    fn on_departure_cleared(&mut self, a: u32) -> Result<(), SimError> {
        let now = self.now();
        let (v, pad) = {
            let ac = &self.aircraft[a as usize];
            (ac.vertiport, ac.pad.expect("departing aircraft sit on a pad"))
        };
        self.release(a, self.vps[v].pad_pool)?;
        self.pad_occupant[v][pad] = None;
        let ac = &mut self.aircraft[a as usize];
        ac.pad = None;
        ac.outbound_taxi = true;
        let job = ac.job.as_mut().expect("cleared aircraft carry a job");
        job.flight.pushback = now;
        if job.kind == FlightKind::SpaceRepositioning {
            self.pending_space[v] -= 1;
        }
        self.set_process(a, Process::Taxi)?;
        let taxi = self.vps[v].taxi_time[pad];
        self.start_timer(a, taxi)?;
        self.dirty = true;
        Ok(())
    }

    fn lift_off(&mut self, a: u32) -> Result<(), SimError> {
        let now = self.now();
        let v = self.aircraft[a as usize].vertiport;
        self.release_taxi(a, v)?;
        let ac = &mut self.aircraft[a as usize];
        ac.outbound_taxi = false;
        let job = ac.job.as_mut().expect("departing aircraft carry a job");
        job.flight.liftoff = now;
        let pax = job.passengers.clone();
        for p in pax {
            self.passengers[p as usize].departure = Some(now);
        }
        self.set_process(a, Process::HoverClimb)?;
        let t = self.phase_time(a, PhaseKind::HoverClimb);
        self.start_timer(a, t)
    }

    /// Taxi resources are recorded on the request; release whatever this
    /// aircraft holds among its vertiport's taxi resources.
    fn release_taxi(&mut self, a: u32, v: usize) -> Result<(), SimError> {
        let held: Vec<ResourceId> = self.vps[v]
            .taxi
            .iter()
            .flatten()
            .flatten()
            .copied()
            .filter(|&r| self.engine.resource(r).is_held_by(EntityId(a)))
            .collect();
        let mut seen = Vec::new();
        for r in held {
            if !seen.contains(&r) {
                seen.push(r);
                self.release(a, r)?;
            }
        }
        Ok(())
    }

    // ---- timers ----------------------------------------------------------

    fn on_timer(&mut self, a: u32) -> Result<(), SimError> {
        let process = self.aircraft[a as usize].process;
        match process {
            Process::Boarding => self.begin_pushback(a),
            Process::Taxi if self.aircraft[a as usize].outbound_taxi => self.lift_off(a),
            Process::Taxi => self.park(a),
            Process::HoverClimb => {
                self.deduct(a, PhaseKind::HoverClimb);
                self.set_process(a, Process::ClimbTransition)?;
                let t = self.phase_time(a, PhaseKind::ClimbTransition);
                self.start_timer(a, t)
            }
            Process::ClimbTransition => {
                self.deduct(a, PhaseKind::ClimbTransition);
                let v = self.aircraft[a as usize].vertiport;
                let group = self.aircraft[a as usize].group;
                self.release(a, self.vps[v].groups[group])?;
                self.release(a, self.vps[v].departure)?;
                self.set_process(a, Process::Climb)?;
                let ac = &mut self.aircraft[a as usize];
                ac.climbing = false;
                ac.chain_pos = 0;
                let (o, d) = ac.job.as_ref().map(|j| (j.origin, j.destination)).expect("climbing aircraft carry a job");
                let exit = self.leg(o, d).chain[0];
                self.reserve(a, &[exit], tag::CHAIN)
            }
            Process::Climb => {
                self.deduct(a, PhaseKind::Climb);
                self.set_process(a, Process::Cruise)?;
                self.request_next_waypoint(a)
            }
            Process::Cruise => self.reach_waypoint(a),
            Process::Descent => {
                self.deduct(a, PhaseKind::Descent);
                let ac = &self.aircraft[a as usize];
                let v = ac.vertiport;
                let pad = ac.pad.expect("landing aircraft hold a pad");
                let group = self.pick_group(v);
                self.aircraft[a as usize].group = group;
                let vp = &self.vps[v];
                let mut members = vec![vp.groups[group], vp.departure];
                members.extend(vp.taxi[pad][group].iter().copied());
                self.reserve(a, &members, tag::LANDING)
            }
            Process::DescentTransition => {
                self.deduct(a, PhaseKind::DescentTransition);
                self.set_process(a, Process::HoverDescent)?;
                let t = self.phase_time(a, PhaseKind::HoverDescent);
                self.start_timer(a, t)
            }
            Process::HoverDescent => self.touch_down(a),
            Process::Disembarking => self.after_turnaround(a),
            Process::PreCharge => self.charge(a),
            Process::Charging => self.end_charge(a),
            Process::PostCharge => self.post_charge_done(a),
            other => Err(SimError::Internal { at: self.now(), message: format!("timer fired for {other}") }),
        }
    }

    fn request_next_waypoint(&mut self, a: u32) -> Result<(), SimError> {
        let ac = &self.aircraft[a as usize];
        let job = ac.job.as_ref().expect("cruising aircraft carry a job");
        let next = self.leg(job.origin, job.destination).chain[ac.chain_pos + 1];
        self.reserve(a, &[next], tag::CHAIN)
    }

    fn link_time(&self, a: u32) -> SimTime {
        let job = self.aircraft[a as usize].job.as_ref().expect("cruising aircraft carry a job");
        let leg = self.leg(job.origin, job.destination);
        let cruise = leg.missions[job.flight.seats as usize].phase(PhaseKind::Cruise).duration_s;
        SimTime::from_secs(cruise / (leg.chain.len() - 1) as f64)
    }

    fn reach_waypoint(&mut self, a: u32) -> Result<(), SimError> {
        let (prev, last, pos) = {
            let ac = &self.aircraft[a as usize];
            let job = ac.job.as_ref().expect("cruising aircraft carry a job");
            let chain = &self.leg(job.origin, job.destination).chain;
            (chain[ac.chain_pos], chain.len() - 1, ac.chain_pos + 1)
        };
        self.release(a, prev)?;
        self.aircraft[a as usize].chain_pos = pos;
        if pos < last {
            return self.request_next_waypoint(a);
        }
        // Arrived over the destination.
        self.deduct(a, PhaseKind::Cruise);
        let d = self.aircraft[a as usize].job.as_ref().map(|j| j.destination).expect("job present");
        self.aircraft[a as usize].vertiport = d;
        self.set_process(a, Process::Holding)?;
        self.inbound_unrequested[d] -= 1;
        self.reserve(a, &[self.vps[d].pad_pool], tag::PAD)?;
        self.dirty = true;
        Ok(())
    }

    fn touch_down(&mut self, a: u32) -> Result<(), SimError> {
        let now = self.now();
        self.deduct(a, PhaseKind::HoverDescent);
        let v = self.aircraft[a as usize].vertiport;
        let group = self.aircraft[a as usize].group;
        self.release(a, self.vps[v].groups[group])?;
        let job = self.aircraft[a as usize].job.as_mut().expect("landing aircraft carry a job");
        job.flight.touchdown = now;
        for p in job.passengers.clone() {
            self.passengers[p as usize].landing = Some(now);
        }
        self.set_process(a, Process::Taxi)?;
        let pad = self.aircraft[a as usize].pad.expect("landing aircraft hold a pad");
        let t = self.vps[v].taxi_time[pad];
        self.start_timer(a, t)
    }

    fn park(&mut self, a: u32) -> Result<(), SimError> {
        let now = self.now();
        let v = self.aircraft[a as usize].vertiport;
        self.release_taxi(a, v)?;
        let ac = &mut self.aircraft[a as usize];
        let mut job = ac.job.take().expect("parking aircraft carry a job");
        job.flight.parked = now;
        job.flight.soc_after = ac.soc;
        if job.kind == FlightKind::DemandRepositioning {
            self.inbound_demand[v] -= 1;
        }
        let has_pax = !job.passengers.is_empty();
        self.flights.push(job.flight);
        if has_pax {
            self.set_process(a, Process::Disembarking)?;
            let t = SimTime::from_minutes(self.policy().disembark_min);
            self.start_timer(a, t)
        } else {
            self.after_turnaround(a)
        }
    }

    // ---- turnaround and charging ------------------------------------------

    fn after_turnaround(&mut self, a: u32) -> Result<(), SimError> {
        let ac = &self.aircraft[a as usize];
        let leg = self.max_leg_soc[ac.vertiport];
        match self.policy().charge_target(ac.soc, leg, self.setup.charger.max_target_soc) {
            Some(target) => self.begin_charge(a, target),
            None => self.become_idle(a),
        }
    }

    fn become_idle(&mut self, a: u32) -> Result<(), SimError> {
        self.set_process(a, Process::Idle)?;
        self.aircraft[a as usize].ready_at = self.now();
        self.dirty = true;
        Ok(())
    }

    fn begin_charge(&mut self, a: u32, target: f64) -> Result<(), SimError> {
        self.set_process(a, Process::PreCharge)?;
        self.aircraft[a as usize].charge_target = Some(target);
        let v = self.aircraft[a as usize].vertiport;
        self.reserve(a, &[self.vps[v].chargers], tag::CHARGER)
    }

    fn charge(&mut self, a: u32) -> Result<(), SimError> {
        let now = self.now();
        self.set_process(a, Process::Charging)?;
        let ac = &mut self.aircraft[a as usize];
        let target = ac.charge_target.expect("charging aircraft have a target");
        ac.charge_start = now;
        ac.charge_from = ac.soc;
        let minutes = self
            .setup
            .charger
            .charge_duration(ac.soc, target)
            .map_err(|e| SimError::Internal { at: now, message: e.to_string() })?;
        self.start_timer(a, SimTime::from_minutes(minutes))
    }

    fn end_charge(&mut self, a: u32) -> Result<(), SimError> {
        let now = self.now();
        let v = self.aircraft[a as usize].vertiport;
        self.release(a, self.vps[v].chargers)?;
        let ac = &mut self.aircraft[a as usize];
        let target = ac.charge_target.take().expect("charging aircraft have a target");
        ac.soc = target;
        let m = &self.setup.charger;
        self.charges.push(ChargeRecord {
            aircraft: a,
            vertiport: v,
            start: ac.charge_start,
            end: now,
            soc_from: ac.charge_from,
            soc_to: target,
            battery_kwh: m.battery_energy_kwh(ac.charge_from, target),
            grid_kwh: m.charger_energy_kwh(ac.charge_from, target),
        });
        self.set_process(a, Process::PostCharge)?;
        let post = SimTime::from_minutes(self.policy().post_charge_min);
        self.aircraft[a as usize].ready_at = now + post;
        self.start_timer(a, post)?;
        self.dirty = true;
        Ok(())
    }

    fn post_charge_done(&mut self, a: u32) -> Result<(), SimError> {
        let now = self.now();
        let ac = &self.aircraft[a as usize];
        if ac.job.is_none() {
            return self.become_idle(a);
        }
        match ac.boarding_started {
            Some(start) => {
                let done = start + SimTime::from_minutes(self.policy().embark_min);
                if done > now {
                    self.set_process(a, Process::Boarding)?;
                    self.start_timer(a, done - now)
                } else {
                    self.begin_pushback(a)
                }
            }
            None => self.begin_pushback(a),
        }
    }

    // ---- grants ----------------------------------------------------------

    fn on_grant(&mut self, a: u32, t: u64) -> Result<(), SimError> {
        match t {
            tag::DEPARTURE => {
                self.aircraft[a as usize].boarding_started = None;
                self.on_departure_cleared(a)
            }
            tag::CHAIN => {
                let ac = &mut self.aircraft[a as usize];
                match ac.process {
                    Process::Climb if !ac.climbing => {
                        ac.climbing = true;
                        let t = self.phase_time(a, PhaseKind::Climb);
                        self.start_timer(a, t)
                    }
                    Process::Cruise => {
                        let t = self.link_time(a);
                        self.start_timer(a, t)
                    }
                    other => Err(SimError::Internal { at: self.now(), message: format!("waypoint grant in {other}") }),
                }
            }
            tag::PAD => {
                let v = self.aircraft[a as usize].vertiport;
                let pad = self.pad_occupant[v].iter().position(Option::is_none).ok_or_else(|| SimError::Internal {
                    at: self.now(),
                    message: format!("pad pool granted at {v} with every pad taken"),
                })?;
                self.pad_occupant[v][pad] = Some(a);
                self.aircraft[a as usize].pad = Some(pad);
                self.reserve(a, &[self.vps[v].approach], tag::APPROACH)
            }
            tag::APPROACH => {
                let v = self.aircraft[a as usize].vertiport;
                self.release(a, self.vps[v].holding)?;
                self.set_process(a, Process::Descent)?;
                let t = self.phase_time(a, PhaseKind::Descent);
                self.start_timer(a, t)
            }
            tag::LANDING => {
                let v = self.aircraft[a as usize].vertiport;
                self.release(a, self.vps[v].approach)?;
                // The fix only had to be clear of departures to start the landing.
                self.release(a, self.vps[v].departure)?;
                self.set_process(a, Process::DescentTransition)?;
                let t = self.phase_time(a, PhaseKind::DescentTransition);
                self.start_timer(a, t)
            }
            tag::CHARGER => {
                let t = SimTime::from_minutes(self.policy().pre_charge_min);
                self.start_timer(a, t)
            }
            other => Err(SimError::Internal { at: self.now(), message: format!("unknown grant tag {other}") }),
        }
    }
}

fn segment_of(p: Process) -> Option<Segment> {
    let s = match p {
        Process::HoverClimb => Segment::Phase(PhaseKind::HoverClimb),
        Process::ClimbTransition => Segment::Phase(PhaseKind::ClimbTransition),
        Process::Climb => Segment::Phase(PhaseKind::Climb),
        Process::Cruise => Segment::Phase(PhaseKind::Cruise),
        Process::Holding => Segment::Holding,
        Process::Descent => Segment::Phase(PhaseKind::Descent),
        Process::DescentTransition => Segment::Phase(PhaseKind::DescentTransition),
        Process::HoverDescent => Segment::Phase(PhaseKind::HoverDescent),
        _ => return None,
    };
    debug_assert!(AIRBORNE_SEGMENTS.contains(&s));
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::super::policy::SOC_EPSILON;
    use super::*;
    use crate::charging::ChargerSpec;
    use crate::demand::{generate_arrivals, DemandProfile};
    use crate::topology::{CloverGeometry, Position, SiteSpec};

    const FT_PER_MI: f64 = 5280.0;

    fn setup(fleet: usize, pads: u32, distance_mi: f64) -> SimulationSetup {
        let site = |id: &str, x: f64| SiteSpec {
            id: id.into(),
            site: Position { x_ft: x, y_ft: 0.0, alt_ft: 0.0 },
            pads,
            tlofs: 1,
            chargers: pads,
        };
        let network = Network::build(
            &[site("A", 0.0), site("B", distance_mi * FT_PER_MI)],
            &[(0, 1, distance_mi)],
            &CloverGeometry::default(),
            1.0,
        )
        .unwrap();
        SimulationSetup {
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
        }
    }

    fn pax(id: u32, o: &str, d: &str, t: SimTime) -> PassengerRequest {
        PassengerRequest { id, origin: o.into(), destination: d.into(), arrival: t }
    }

    fn minutes(t: SimTime) -> f64 {
        t.as_minutes()
    }

    #[test]
    fn free_vertiport_surface_times() {
        let s = setup(2, 2, 24.0);
        let out = simulate(&s, &[pax(0, "A", "B", SimTime::ZERO)]).unwrap();
        assert_eq!(out.flights.len(), 1);
        let f = &out.flights[0];
        // Lone passenger waits out the threshold, then boards for 2 min.
        assert_eq!(f.pushback, SimTime::from_minutes(12.0));
        // Pad to airborne: taxi-out plus the 60 s TLOF departure.
        let departure = (f.liftoff - f.pushback).as_secs() + f.segment_s[0] + f.segment_s[1];
        assert!((departure - 90.0).abs() < 1e-6, "{departure}");
        // Arrival to pad: the 60 s TLOF arrival plus taxi-in, no holding.
        let arrival = f.segment_s[6] + f.segment_s[7] + (f.parked - f.touchdown).as_secs();
        assert!((arrival - 90.0).abs() < 1e-6, "{arrival}");
        assert_eq!(f.segment_s[Segment::Holding.index()], 0.0);
        let airborne: f64 = f.segment_s.iter().sum();
        assert!((airborne - f.airborne_s()).abs() < 0.01);
        let p = &out.passengers[0];
        assert_eq!(p.departure, Some(f.liftoff));
        assert!((p.delay_min(out.horizon) - 12.5).abs() < 1e-9);
    }

    #[test]
    fn turnaround_without_charge_is_four_minutes() {
        let s = setup(1, 1, 24.0);
        let mut arrivals: Vec<_> = (0..4).map(|i| pax(i, "A", "B", SimTime::ZERO)).collect();
        arrivals.extend((4..8).map(|i| pax(i, "B", "A", SimTime::ZERO)));
        let out = simulate(&s, &arrivals).unwrap();
        assert_eq!(out.flights.len(), 2);
        let (first, second) = (&out.flights[0], &out.flights[1]);
        assert_eq!(second.kind, FlightKind::Passenger);
        assert!(out.charges.is_empty());
        assert_eq!(minutes(second.pushback - first.parked), 4.0);
    }

    #[test]
    fn low_soc_charges_to_two_legs_above_reserve() {
        let mut s = setup(1, 1, 24.0);
        s.initial_soc = 25.0;
        let arrivals: Vec<_> = (0..4).map(|i| pax(i, "A", "B", SimTime::ZERO)).collect();
        let out = simulate(&s, &arrivals).unwrap();
        let leg = out.leg_soc[0].1;
        assert!(25.0 - leg < 20.0);
        assert_eq!(out.charges.len(), 1);
        let c = &out.charges[0];
        assert!((c.soc_to - (20.0 + 2.0 * leg)).abs() < 1e-9);
        assert_eq!(c.start, SimTime::from_minutes(3.0));
        // Boarding overlaps the 3 min post-charge, so pushback waits only for it.
        let f = &out.flights[0];
        assert_eq!(f.pushback, c.end + SimTime::from_minutes(3.0));
        assert!(f.soc_after >= 20.0);
    }

    #[test]
    fn full_vertiport_triggers_space_repositioning() {
        let s = setup(2, 1, 24.0);
        let arrivals: Vec<_> = (0..4).map(|i| pax(i, "B", "A", SimTime::ZERO)).collect();
        let out = simulate(&s, &arrivals).unwrap();
        let kinds: Vec<_> = out.flights.iter().map(|f| (f.kind, f.origin, f.destination)).collect();
        assert!(kinds.contains(&(FlightKind::Passenger, 1, 0)));
        assert!(kinds.contains(&(FlightKind::SpaceRepositioning, 0, 1)));
        let passenger = out.flights.iter().find(|f| f.kind == FlightKind::Passenger).unwrap();
        let space = out.flights.iter().find(|f| f.kind == FlightKind::SpaceRepositioning).unwrap();
        // The holder lands only after the idle aircraft has cleared the pad.
        assert!(space.pushback <= passenger.touchdown);
        assert_eq!(space.pax, 0);
    }

    #[test]
    fn starved_vertiport_pulls_an_aircraft() {
        let s = setup(1, 1, 24.0);
        let arrivals: Vec<_> = (0..4).map(|i| pax(i, "B", "A", SimTime::ZERO)).collect();
        let out = simulate(&s, &arrivals).unwrap();
        assert_eq!(out.flights.len(), 2);
        assert_eq!((out.flights[0].kind, out.flights[0].origin), (FlightKind::DemandRepositioning, 0));
        assert_eq!((out.flights[1].kind, out.flights[1].origin, out.flights[1].pax), (FlightKind::Passenger, 1, 4));
    }

    #[test]
    fn repositioning_carries_waiting_passengers() {
        let s = setup(1, 1, 24.0);
        let mut arrivals = vec![pax(0, "A", "B", SimTime::ZERO)];
        arrivals.extend((1..5).map(|i| pax(i, "B", "A", SimTime::ZERO)));
        let out = simulate(&s, &arrivals).unwrap();
        // The lone A->B passenger rides the pull towards B.
        let pull = &out.flights[0];
        assert_eq!((pull.kind, pull.pax), (FlightKind::DemandRepositioning, 1));
        assert!(out.passengers.iter().all(|p| p.landing.is_some()));
    }

    #[test]
    fn no_demand_means_a_day_of_idling() {
        let s = setup(4, 2, 24.0);
        let out = simulate(&s, &[]).unwrap();
        assert!(out.flights.is_empty());
        assert_eq!(out.intervals.len(), 4);
        for i in &out.intervals {
            assert_eq!((i.process, i.start, i.end), (Process::Idle, SimTime::ZERO, out.horizon));
        }
    }

    #[test]
    fn overfull_start_is_rejected() {
        let mut s = setup(2, 1, 24.0);
        s.initial_placement = vec![0, 0];
        assert!(matches!(simulate(&s, &[]), Err(SimError::InitialOverflow { .. })));
        let bad = pax(0, "A", "Z", SimTime::ZERO);
        assert!(matches!(simulate(&setup(2, 1, 24.0), &[bad]), Err(SimError::UnknownVertiport { .. })));
    }

    #[test]
    fn daily_run_settles_every_request() {
        let s = setup(14, 7, 24.0);
        let arrivals = generate_arrivals(&DemandProfile::reconstructed(), 3);
        let out = simulate(&s, &arrivals).unwrap();
        assert_eq!(out.pending_requests, 0);
        let c = out.counters;
        assert_eq!(c.granted + c.cancelled, c.issued);
        assert!(out.flights.iter().all(|f| f.soc_after >= 20.0 - SOC_EPSILON));
        assert!(out.flights.iter().all(|f| f.pax <= 4));
        let again = simulate(&s, &arrivals).unwrap();
        assert_eq!(out.flights, again.flights);
        assert_eq!(out.passengers, again.passengers);
    }
}
