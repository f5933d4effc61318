//! Event-driven simulation and analytic planning for eVTOL vertiport networks.

// Negated float comparisons are how inputs reject NaN as well as out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod charging;
pub mod demand;
pub mod energy;
pub mod fleet;
pub mod kernel;
pub mod metrics;
pub mod par;
pub mod planning;
pub mod scenario;
pub mod seed;
pub mod topology;
