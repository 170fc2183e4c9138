//! XGS-PON upstream: ONU TCONT queues, the OLT's DBA in both modes, bandwidth
//! map construction and validation, and burst-level execution of each frame.

mod bwmap;
mod dba;
mod olt;
mod queue;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimTime;

pub use bwmap::{
    parse_bwmap_trace, validate_bwmap, write_bwmap_trace, AllocKind, Allocation, BwMap, Violation,
    BWMAP_TRACE_HEADER,
};
pub use dba::{proportional_fill, Gaps};
pub use olt::{FrameOutcome, Olt, OnuLink, StatusReport, TcontSpec};
pub use queue::{EnqueueOutcome, QueuedPacket, TcontQueue};

pub use crate::cti::TcontId;
pub type OnuId = u16;

/// One-way fiber propagation delay per kilometre.
pub const PROPAGATION_PER_KM: SimTime = SimTime::from_micros(5);

/// Converts a fiber length to a one-way propagation delay (nearest ns).
pub fn propagation_for_km(km: f64) -> SimTime {
    SimTime::from_nanos((km * PROPAGATION_PER_KM.as_nanos() as f64).round() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DbaMode {
    /// Cooperative: CTI reports drive pre-placed grants, status reports fill
    /// in the rest.
    Cti,
    /// Baseline: status reports only.
    Sr,
}

impl DbaMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DbaMode::Cti => "cti",
            DbaMode::Sr => "sr",
        }
    }
}

impl std::fmt::Display for DbaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DbaMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cti" => Ok(DbaMode::Cti),
            "sr" => Ok(DbaMode::Sr),
            other => Err(format!("unknown mode {other:?} (expected \"cti\" or \"sr\")")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficClass {
    Fronthaul,
    Background,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PonConfig {
    pub frame_duration: SimTime,
    pub upstream_rate_bps: u64,
    /// Silence after every burst.
    pub guard_bytes: u32,
    /// Preamble and delimiter ahead of every burst.
    pub burst_overhead_bytes: u32,
    pub sr_poll_interval: SimTime,
    /// Time the OLT needs to compute and send a bandwidth map.
    pub olt_processing: SimTime,
    /// Fraction of the frame usable for allocations (FEC and line coding).
    pub efficiency: f64,
    /// Encapsulation header paid by every fragment of a split packet.
    pub xgem_header_bytes: u32,
    pub max_queue_bytes: u64,
    /// Treat any invalid bandwidth map as a runtime failure.
    pub strict: bool,
}

impl Default for PonConfig {
    fn default() -> Self {
        PonConfig {
            frame_duration: SimTime::from_micros(125),
            upstream_rate_bps: 9_953_280_000,
            guard_bytes: 64,
            burst_overhead_bytes: 40,
            sr_poll_interval: SimTime::from_micros(500),
            olt_processing: SimTime::from_micros(35),
            efficiency: 1.0,
            xgem_header_bytes: 8,
            max_queue_bytes: 10_000_000,
            strict: true,
        }
    }
}

const NS_BITS_PER_BYTE: u128 = 8 * 1_000_000_000;

impl PonConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.frame_duration == SimTime::ZERO {
            out.push("frame_duration must be > 0".into());
        }
        if self.upstream_rate_bps == 0 {
            out.push("upstream_rate_bps must be > 0".into());
        } else if !(self.upstream_rate_bps as u128 * self.frame_duration.as_nanos() as u128).is_multiple_of(NS_BITS_PER_BYTE)
        {
            out.push(format!(
                "upstream_rate_bps {} does not give a whole number of bytes per {} frame",
                self.upstream_rate_bps, self.frame_duration
            ));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            out.push(format!("efficiency must be within (0, 1], got {}", self.efficiency));
        }
        if self.sr_poll_interval == SimTime::ZERO {
            out.push("sr_poll_interval must be > 0".into());
        }
        if self.max_queue_bytes == 0 {
            out.push("max_queue_bytes must be > 0".into());
        }
        out
    }

    /// Raw bytes per frame at line rate.
    pub fn frame_capacity_bytes(&self) -> u32 {
        (self.upstream_rate_bps as u128 * self.frame_duration.as_nanos() as u128
            / NS_BITS_PER_BYTE) as u32
    }

    /// Bytes per frame the DBA may lay out after the efficiency factor.
    pub fn usable_capacity_bytes(&self) -> u32 {
        (self.frame_capacity_bytes() as f64 * self.efficiency).floor() as u32
    }

    /// Serialization time of `bytes` at line rate, rounded up.
    pub fn bytes_to_time(&self, bytes: u64) -> SimTime {
        let ns = (bytes as u128 * NS_BITS_PER_BYTE).div_ceil(self.upstream_rate_bps as u128);
        SimTime::from_nanos(ns as u64)
    }

    /// Smallest byte offset whose serialization time is at least `t`.
    pub fn time_to_bytes(&self, t: SimTime) -> u64 {
        (t.as_nanos() as u128 * self.upstream_rate_bps as u128).div_ceil(NS_BITS_PER_BYTE) as u64
    }

    pub fn frame_start(&self, frame_index: u64) -> SimTime {
        self.frame_duration * frame_index
    }

    /// Frames between poll opportunities for a silent TCONT.
    pub fn poll_frames(&self) -> u64 {
        (self.sr_poll_interval.as_nanos() / self.frame_duration.as_nanos()).max(1)
    }

    /// Frames between computing a map and executing it.
    pub fn map_lag_frames(&self, max_propagation: SimTime) -> u64 {
        let delay = (self.olt_processing + max_propagation).as_nanos();
        delay.div_ceil(self.frame_duration.as_nanos()).max(1)
    }
}

/// Per-packet upstream latency record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencySample {
    pub packet_id: u64,
    pub tcont_id: TcontId,
    pub class: TrafficClass,
    pub bytes: u32,
    pub enqueue_time: SimTime,
    /// Data start of the allocation that carried the packet's first byte.
    pub grant_start_time: SimTime,
    /// Last byte received at the OLT.
    pub olt_rx_time: SimTime,
}

impl LatencySample {
    pub fn queue_delay(&self) -> SimTime {
        self.grant_start_time - self.enqueue_time
    }

    pub fn total_delay(&self) -> SimTime {
        self.olt_rx_time - self.enqueue_time
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PonError {
    #[error("duplicate tcont_id {0}")]
    DuplicateTcont(TcontId),
    #[error("tcont {tcont} references unknown onu {onu}")]
    UnknownOnu { tcont: TcontId, onu: OnuId },
    #[error("unknown tcont {0}")]
    UnknownTcont(TcontId),
    #[error("empty packet for tcont {0}")]
    EmptyPacket(TcontId),
    #[error("invalid bandwidth map for frame {frame}: {violations:?}")]
    InvalidMap {
        frame: u64,
        violations: Vec<Violation>,
    },
}
