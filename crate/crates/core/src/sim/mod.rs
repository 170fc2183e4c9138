//! Deterministic discrete-event engine: virtual time, the ordered event
//! queue, and seeded random streams.

mod queue;
mod rng;
mod time;

pub use queue::{ComponentId, Event, QueueCounters, RunSummary, SimError, Simulator, Ticket};
pub use rng::RngStream;
pub use time::{ParseTimeError, SimTime};
