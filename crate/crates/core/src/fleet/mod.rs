//! Aircraft, passengers and the operating policy running on top of the kernel.

mod policy;
mod process;
mod records;
mod sim;
mod waiting;

pub use policy::{PolicyConfig, SOC_EPSILON};
pub use process::{Category, Process};
pub use records::{
    write_flights_csv, write_passengers_csv, ChargeRecord, FlightKind, FlightRecord, PassengerRecord, ProcessInterval,
    Segment, AIRBORNE_SEGMENTS,
};
pub use sim::{simulate, ResourceInfo, SimError, SimulationOutput, SimulationSetup, TRANSITION};
pub use waiting::WaitingRoom;
