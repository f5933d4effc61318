//! Deterministic discrete-event kernel.
//!
//! The kernel owns three things: a millisecond clock, a time-ordered event
//! queue, and a table of capacity-limited resources. Events with equal
//! timestamps are dequeued in insertion order, so a run is fully determined
//! by its inputs.
//!
//! Resources are served first-reserve-first-serve. A request may name several
//! resources at once; such a batch is granted atomically when it sits at the
//! head of every member's wait queue and every member has a free slot. A batch
//! keeps its position in all member queues while it waits, which rules out
//! the partial-acquisition deadlocks of taking resources one at a time.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::io;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulation time in whole milliseconds since the start of the run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_ms(ms: u64) -> Self {
        SimTime(ms)
    }

    /// Rounds to the nearest millisecond; negative inputs clamp to zero.
    pub fn from_secs(secs: f64) -> Self {
        SimTime((secs * 1000.0).round().max(0.0) as u64)
    }

    pub fn from_minutes(minutes: f64) -> Self {
        Self::from_secs(minutes * 60.0)
    }

    pub fn from_hours(hours: f64) -> Self {
        Self::from_secs(hours * 3600.0)
    }

    pub const fn as_ms(self) -> u64 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn as_minutes(self) -> f64 {
        self.0 as f64 / 60_000.0
    }

    pub fn as_hours(self) -> f64 {
        self.0 as f64 / 3_600_000.0
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_sub(rhs.0).expect("negative simulation duration"))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}s", self.0 / 1000, self.0 % 1000)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ResourceId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RequestId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Capacity {
    Finite(u32),
    Unbounded,
}

impl Capacity {
    pub fn admits(self, holders: usize) -> bool {
        match self {
            Capacity::Finite(c) => holders < c as usize,
            Capacity::Unbounded => true,
        }
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capacity::Finite(c) => write!(f, "{c}"),
            Capacity::Unbounded => f.write_str("unbounded"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("event scheduled at {requested} but the clock is already at {now}")]
    ScheduleInPast { now: SimTime, requested: SimTime },
    #[error("entity {entity} already holds or awaits resource '{resource}'")]
    DuplicateReservation { resource: String, entity: EntityId },
    #[error("entity {entity} does not hold resource '{resource}'")]
    NotHeld { resource: String, entity: EntityId },
    #[error("unknown resource id {0:?}")]
    UnknownResource(ResourceId),
    #[error("unknown or already settled request {0:?}")]
    UnknownRequest(RequestId),
    #[error("a reservation must name at least one resource")]
    EmptyBatch,
    #[error("resource '{0}' appears twice in one batch")]
    RepeatedMember(String),
}

/// Notification that a queued request now holds all of its resources.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grant {
    pub request: RequestId,
    pub entity: EntityId,
    /// Opaque caller token attached at reservation time.
    pub tag: u64,
}

/// Event payloads carried by the kernel. Deferred grants are delivered as
/// payloads too, hence the `From<Grant>` bound.
pub trait Payload: From<Grant> {
    fn kind(&self) -> &'static str;
    fn subject(&self) -> u64;
    fn detail(&self) -> String {
        String::new()
    }
}

/// A dequeued event.
#[derive(Clone, Debug, PartialEq)]
pub struct SimEvent<E> {
    pub time: SimTime,
    pub sequence: u64,
    pub payload: E,
}

struct Queued<E> {
    time: SimTime,
    sequence: u64,
    payload: E,
}

impl<E> PartialEq for Queued<E> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.sequence == other.sequence
    }
}

impl<E> Eq for Queued<E> {}

impl<E> PartialOrd for Queued<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Queued<E> {
    // BinaryHeap is a max-heap; invert so the earliest (time, sequence) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.cmp(&self.time).then_with(|| other.sequence.cmp(&self.sequence))
    }
}

#[derive(Clone, Debug)]
pub struct Resource {
    name: String,
    capacity: Capacity,
    holders: Vec<EntityId>,
    /// Pending requests ordered by (priority, request id).
    queue: Vec<RequestId>,
}

impl Resource {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn capacity(&self) -> Capacity {
        self.capacity
    }

    pub fn holders(&self) -> &[EntityId] {
        &self.holders
    }

    pub fn is_held_by(&self, entity: EntityId) -> bool {
        self.holders.contains(&entity)
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn has_room(&self) -> bool {
        self.capacity.admits(self.holders.len())
    }
}

#[derive(Clone, Debug)]
struct PendingRequest {
    entity: EntityId,
    members: Vec<ResourceId>,
    priority: u8,
    tag: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reservation {
    Granted(RequestId),
    Queued(RequestId),
}

impl Reservation {
    pub fn request(self) -> RequestId {
        match self {
            Reservation::Granted(r) | Reservation::Queued(r) => r,
        }
    }

    pub fn is_granted(self) -> bool {
        matches!(self, Reservation::Granted(_))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RequestCounters {
    pub issued: u64,
    pub granted: u64,
    pub cancelled: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogEntry {
    pub time_ms: u64,
    pub sequence: u64,
    pub kind: &'static str,
    pub subject: u64,
    pub detail: String,
}

/// Append-only record of everything the kernel and its caller did.
#[derive(Clone, Debug, Default)]
pub struct EventLog {
    enabled: bool,
    entries: Vec<LogEntry>,
}

impl EventLog {
    pub fn new(enabled: bool) -> Self {
        EventLog { enabled, entries: Vec::new() }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    fn push(&mut self, time: SimTime, kind: &'static str, subject: u64, detail: impl FnOnce() -> String) {
        if self.enabled {
            let sequence = self.entries.len() as u64;
            self.entries.push(LogEntry { time_ms: time.as_ms(), sequence, kind, subject, detail: detail() });
        }
    }

    /// Writes `time_ms,sequence,kind,subject,detail` rows.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        for entry in &self.entries {
            out.serialize(entry)?;
        }
        if self.entries.is_empty() {
            out.write_record(["time_ms", "sequence", "kind", "subject", "detail"])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Kinds the kernel itself writes for resource bookkeeping. Resource entries
/// carry `res=<id>` as the first token of their detail.
pub mod log_kind {
    pub const RESERVE: &str = "reserve";
    pub const GRANT: &str = "grant";
    pub const RELEASE: &str = "release";
    pub const CANCEL: &str = "cancel";
}

pub struct Engine<E> {
    now: SimTime,
    next_sequence: u64,
    queue: BinaryHeap<Queued<E>>,
    resources: Vec<Resource>,
    pending: BTreeMap<RequestId, PendingRequest>,
    next_request: u64,
    counters: RequestCounters,
    log: EventLog,
}

impl<E: Payload> Default for Engine<E> {
    fn default() -> Self {
        Self::new(false)
    }
}

impl<E: Payload> Engine<E> {
    pub fn new(record_log: bool) -> Self {
        Engine {
            now: SimTime::ZERO,
            next_sequence: 0,
            queue: BinaryHeap::new(),
            resources: Vec::new(),
            pending: BTreeMap::new(),
            next_request: 0,
            counters: RequestCounters::default(),
            log: EventLog::new(record_log),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    pub fn counters(&self) -> RequestCounters {
        self.counters
    }

    pub fn pending_requests(&self) -> usize {
        self.pending.len()
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn take_log(&mut self) -> EventLog {
        let enabled = self.log.enabled;
        std::mem::replace(&mut self.log, EventLog::new(enabled))
    }

    /// Appends a caller-defined record at the current clock.
    pub fn note(&mut self, kind: &'static str, subject: u64, detail: impl FnOnce() -> String) {
        self.log.push(self.now, kind, subject, detail);
    }

    pub fn schedule(&mut self, time: SimTime, payload: E) -> Result<u64, KernelError> {
        if time < self.now {
            return Err(KernelError::ScheduleInPast { now: self.now, requested: time });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(Queued { time, sequence, payload });
        Ok(sequence)
    }

    pub fn schedule_in(&mut self, delay: SimTime, payload: E) -> u64 {
        let at = self.now + delay;
        self.schedule(at, payload).expect("relative schedule cannot be in the past")
    }

    /// Pops the next event and moves the clock to it. `None` means the
    /// simulation has nothing left to do.
    pub fn advance(&mut self) -> Option<SimEvent<E>> {
        let Queued { time, sequence, payload } = self.queue.pop()?;
        debug_assert!(time >= self.now);
        self.now = time;
        self.log.push(time, payload.kind(), payload.subject(), || payload.detail());
        Some(SimEvent { time, sequence, payload })
    }

    pub fn add_resource(&mut self, name: impl Into<String>, capacity: Capacity) -> ResourceId {
        let id = ResourceId(self.resources.len() as u32);
        self.resources.push(Resource { name: name.into(), capacity, holders: Vec::new(), queue: Vec::new() });
        id
    }

    pub fn resource(&self, id: ResourceId) -> &Resource {
        &self.resources[id.0 as usize]
    }

    pub fn resources(&self) -> impl Iterator<Item = (ResourceId, &Resource)> {
        self.resources.iter().enumerate().map(|(i, r)| (ResourceId(i as u32), r))
    }

    pub fn reserve(&mut self, entity: EntityId, resource: ResourceId, tag: u64) -> Result<Reservation, KernelError> {
        self.reserve_all(entity, &[resource], 0, tag)
    }

    /// Atomic multi-resource reservation. Lower `priority` values are served
    /// first; equal priorities are served in request order.
    pub fn reserve_all(
        &mut self,
        entity: EntityId,
        members: &[ResourceId],
        priority: u8,
        tag: u64,
    ) -> Result<Reservation, KernelError> {
        if members.is_empty() {
            return Err(KernelError::EmptyBatch);
        }
        for (i, &m) in members.iter().enumerate() {
            let res = self.resources.get(m.0 as usize).ok_or(KernelError::UnknownResource(m))?;
            if members[..i].contains(&m) {
                return Err(KernelError::RepeatedMember(res.name.clone()));
            }
            let awaiting = res.queue.iter().any(|r| self.pending[r].entity == entity);
            if res.is_held_by(entity) || awaiting {
                return Err(KernelError::DuplicateReservation { resource: res.name.clone(), entity });
            }
        }

        let id = RequestId(self.next_request);
        self.next_request += 1;
        self.counters.issued += 1;
        let request = PendingRequest { entity, members: members.to_vec(), priority, tag };
        self.log.push(self.now, log_kind::RESERVE, u64::from(entity.0), || {
            let ids: Vec<String> = members.iter().map(|m| m.0.to_string()).collect();
            format!("res={} req={}", ids.join("+"), id.0)
        });

        for &m in members {
            if self.resources[m.0 as usize].capacity == Capacity::Unbounded {
                continue;
            }
            let pos = {
                let queue = &self.resources[m.0 as usize].queue;
                queue
                    .iter()
                    .position(|r| {
                        let other = &self.pending[r];
                        (other.priority, r.0) > (priority, id.0)
                    })
                    .unwrap_or(queue.len())
            };
            self.resources[m.0 as usize].queue.insert(pos, id);
        }
        self.pending.insert(id, request);

        if self.grantable(id) {
            self.grant(id, false);
            Ok(Reservation::Granted(id))
        } else {
            Ok(Reservation::Queued(id))
        }
    }

    pub fn release(&mut self, entity: EntityId, resource: ResourceId) -> Result<(), KernelError> {
        let res = self.resources.get_mut(resource.0 as usize).ok_or(KernelError::UnknownResource(resource))?;
        let Some(pos) = res.holders.iter().position(|&h| h == entity) else {
            return Err(KernelError::NotHeld { resource: res.name.clone(), entity });
        };
        res.holders.remove(pos);
        self.log.push(self.now, log_kind::RELEASE, u64::from(entity.0), || format!("res={}", resource.0));
        self.pump(vec![resource]);
        Ok(())
    }

    /// Withdraws a request that has not been granted yet.
    pub fn cancel(&mut self, request: RequestId) -> Result<(), KernelError> {
        let req = self.pending.remove(&request).ok_or(KernelError::UnknownRequest(request))?;
        for &m in &req.members {
            self.resources[m.0 as usize].queue.retain(|&r| r != request);
        }
        self.counters.cancelled += 1;
        self.log.push(self.now, log_kind::CANCEL, u64::from(req.entity.0), || format!("req={}", request.0));
        self.pump(req.members);
        Ok(())
    }

    fn grantable(&self, id: RequestId) -> bool {
        let req = &self.pending[&id];
        req.members.iter().all(|&m| {
            let res = &self.resources[m.0 as usize];
            res.capacity == Capacity::Unbounded || (res.queue.first() == Some(&id) && res.has_room())
        })
    }

    fn grant(&mut self, id: RequestId, deferred: bool) -> Vec<ResourceId> {
        let req = self.pending.remove(&id).expect("granting unknown request");
        for &m in &req.members {
            let res = &mut self.resources[m.0 as usize];
            if res.capacity != Capacity::Unbounded {
                debug_assert_eq!(res.queue.first(), Some(&id));
                res.queue.remove(0);
            }
            res.holders.push(req.entity);
            self.log.push(self.now, log_kind::GRANT, u64::from(req.entity.0), || format!("res={} req={}", m.0, id.0));
        }
        self.counters.granted += 1;
        if deferred {
            let grant = Grant { request: id, entity: req.entity, tag: req.tag };
            self.schedule_in(SimTime::ZERO, E::from(grant));
        }
        req.members
    }

    fn pump(&mut self, mut work: Vec<ResourceId>) {
        while let Some(rid) = work.pop() {
            let Some(&head) = self.resources[rid.0 as usize].queue.first() else {
                continue;
            };
            if self.grantable(head) {
                let members = self.grant(head, true);
                work.extend(members);
            }
        }
    }
}
