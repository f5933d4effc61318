//! Per-vertiport waiting rooms, one FIFO per destination.

use std::collections::{BTreeMap, VecDeque};

use crate::kernel::SimTime;

#[derive(Clone, Debug, Default)]
pub struct WaitingRoom {
    queues: BTreeMap<usize, VecDeque<(u32, SimTime)>>,
}

impl WaitingRoom {
    pub fn push(&mut self, destination: usize, passenger: u32, arrival: SimTime) {
        let q = self.queues.entry(destination).or_default();
        debug_assert!(q.back().is_none_or(|&(_, t)| t <= arrival), "arrivals enter in time order");
        q.push_back((passenger, arrival));
    }

    pub fn len(&self, destination: usize) -> usize {
        self.queues.get(&destination).map_or(0, VecDeque::len)
    }

    pub fn total(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn oldest(&self, destination: usize) -> Option<SimTime> {
        self.queues.get(&destination).and_then(|q| q.front()).map(|&(_, t)| t)
    }

    /// Removes up to `n` passengers bound for `destination`, oldest first.
    pub fn take(&mut self, destination: usize, n: usize) -> Vec<u32> {
        match self.queues.get_mut(&destination) {
            Some(q) => {
                let n = n.min(q.len());
                q.drain(..n).map(|(p, _)| p).collect()
            }
            None => Vec::new(),
        }
    }

    /// Destinations with someone waiting, longest-waiting first.
    pub fn destinations_by_age(&self) -> Vec<usize> {
        let mut d: Vec<(SimTime, usize)> =
            self.queues.iter().filter_map(|(&dest, q)| q.front().map(|&(_, t)| (t, dest))).collect();
        d.sort();
        d.into_iter().map(|(_, dest)| dest).collect()
    }
}
