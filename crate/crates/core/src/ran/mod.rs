//! UE demand, the DU uplink MAC scheduler, and the mapping from uplink grants
//! to the fronthaul bursts the RU-side ONU has to carry upstream.

mod fronthaul;
mod mcs;
mod sched;
mod traffic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimTime;

pub use fronthaul::{arrival_time, fronthaul_bytes_for_grant, fronthaul_bytes_for_prbs, IqFormat};
pub use mcs::{
    mcs_entry, tbs_from_prbs, Mcs, MCS_64QAM_THREE_QUARTERS, MCS_256QAM_MAX, MCS_QPSK_HALF,
    MCS_TABLE, SUBCARRIERS_PER_PRB, SYMBOLS_PER_SLOT,
};
pub use sched::{split_prbs, RoundRobinScheduler};
pub use traffic::{TrafficKind, TrafficSource, UeTrafficProfile};

pub type UeId = u16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RanError {
    #[error("unknown MCS index {0}")]
    UnknownMcs(u8),
    #[error("IQ bit width {0} outside 4..=16")]
    InvalidBitwidth(u8),
    #[error("timing advance {advance} exceeds arrival instant {arrival} of slot {tx_slot}")]
    NegativeArrival {
        tx_slot: u64,
        arrival: SimTime,
        advance: SimTime,
    },
    #[error("slot {got} scheduled out of order (expected {expected})")]
    SlotOrder { expected: u64, got: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlotConfig {
    pub slot_duration: SimTime,
    pub prbs_total: u32,
    /// Slots between grant issuance and the UE's transmission.
    pub k2: u32,
    pub ru_processing_delay: SimTime,
    /// DU-side timing adjustment that pulls fronthaul arrival earlier.
    pub du_timing_advance: SimTime,
}

impl Default for SlotConfig {
    fn default() -> Self {
        SlotConfig {
            slot_duration: SimTime::from_millis(1),
            prbs_total: 51,
            k2: 4,
            ru_processing_delay: SimTime::from_micros(50),
            du_timing_advance: SimTime::ZERO,
        }
    }
}

impl SlotConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.slot_duration == SimTime::ZERO {
            out.push("slot_duration must be > 0".into());
        }
        if self.prbs_total == 0 {
            out.push("prbs_total must be > 0".into());
        }
        if self.k2 == 0 {
            out.push("k2 must be >= 1".into());
        }
        out
    }

    pub fn slot_start(&self, slot_index: u64) -> SimTime {
        self.slot_duration * slot_index
    }
}

/// Uplink demand and buffer state of one UE.
#[derive(Debug, Clone)]
pub struct UeState {
    pub ue_id: UeId,
    /// Uplink backlog, including bytes already granted but not yet sent.
    pub buffer_bytes: u64,
    /// Part of `buffer_bytes` covered by grants whose `tx_slot` is pending.
    pub granted_pending: u64,
    pub mcs: u8,
    pub source: TrafficSource,
    pub generated_bytes: u64,
    pub transmitted_bytes: u64,
    pub padding_bytes: u64,
}

impl UeState {
    pub fn new(ue_id: UeId, mcs: u8, source: TrafficSource) -> Self {
        UeState {
            ue_id,
            buffer_bytes: 0,
            granted_pending: 0,
            mcs,
            source,
            generated_bytes: 0,
            transmitted_bytes: 0,
            padding_bytes: 0,
        }
    }

    /// Backlog not yet covered by any grant.
    pub fn unscheduled_bytes(&self) -> u64 {
        self.buffer_bytes - self.granted_pending
    }

    /// Debits the buffer when the UE actually transmits on a grant.
    pub fn complete_grant(&mut self, grant: &UplinkGrant) {
        debug_assert_eq!(grant.ue_id, self.ue_id);
        let payload = grant.payload_bytes as u64;
        self.buffer_bytes -= payload;
        self.granted_pending -= payload;
        self.transmitted_bytes += payload;
        self.padding_bytes += (grant.tbs_bytes - grant.payload_bytes) as u64;
    }
}

/// Adds one slot's worth of demand to the UE buffer.
pub fn gen_traffic(ue: &mut UeState, slot_index: u64, cfg: &SlotConfig) -> u64 {
    let added = ue
        .source
        .generate(cfg.slot_start(slot_index), cfg.slot_duration);
    ue.buffer_bytes += added;
    ue.generated_bytes += added;
    added
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UplinkGrant {
    pub grant_slot: u64,
    pub tx_slot: u64,
    pub ue_id: UeId,
    pub n_prbs: u32,
    pub tbs_bytes: u32,
    /// Buffered bytes the grant will carry; `tbs_bytes - payload_bytes` is
    /// padding.
    pub payload_bytes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrantRef {
    pub ue_id: UeId,
    pub grant_slot: u64,
}

/// IQ burst for one grant, as it shows up at the ONU ingress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FronthaulPacket {
    pub packet_id: u64,
    pub bytes: u32,
    pub created_at: SimTime,
    pub grant: Option<GrantRef>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::RngStream;

    #[test]
    fn gen_traffic_fills_buffer() {
        let src = TrafficSource::new(UeTrafficProfile::constant(8e6), RngStream::new(0, "ue/0"));
        let mut ue = UeState::new(0, MCS_QPSK_HALF, src);
        let cfg = SlotConfig::default();
        assert_eq!(gen_traffic(&mut ue, 0, &cfg), 1000);
        assert_eq!(ue.buffer_bytes, 1000);
        assert_eq!(ue.generated_bytes, 1000);
    }

    #[test]
    fn slot_config_rejects_degenerate_values() {
        let cfg = SlotConfig {
            slot_duration: SimTime::ZERO,
            prbs_total: 0,
            k2: 0,
            ..SlotConfig::default()
        };
        assert_eq!(cfg.validate().len(), 3);
        assert!(SlotConfig::default().validate().is_empty());
    }
}
