//! Cooperative PON upstream scheduling for 5G fronthaul.
//!
//! A DU MAC scheduler ([`ran`]) issues uplink grants; each grant becomes a
//! fronthaul burst that the RU-side ONU queues in a TCONT ([`pon`]). With the
//! cooperative transport interface ([`cti`]) the DU tells the OLT about those
//! bursts ahead of time, so the DBA can put the grant in the bandwidth map
//! right when the burst lands. The baseline DBA only reacts to status reports.
//! [`telemetry`] turns per-packet latency samples into windowed metrics.

pub mod cti;
pub mod pon;
pub mod ran;
pub mod sim;
pub mod telemetry;
