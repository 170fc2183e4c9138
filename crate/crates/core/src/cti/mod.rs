//! Cooperative Transport Interface: DU-to-OLT reports announcing upcoming
//! fronthaul bursts per TCONT.

mod codec;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ran::{arrival_time, fronthaul_bytes_for_grant, IqFormat, RanError, SlotConfig, UeId, UplinkGrant};
use crate::sim::SimTime;

pub use codec::{
    decode, encode, encoded_len, DecodeError, EncodeError, ENTRY_LEN, HEADER_LEN, MAGIC,
    MAX_ENTRIES, MSG_TYPE_GRANT_REPORT, VERSION,
};

pub type TcontId = u16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CtiEntry {
    pub tcont_id: TcontId,
    pub expected_bytes: u32,
    pub arrival_start: SimTime,
    pub arrival_end: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CtiReport {
    pub version: u8,
    pub seq: u16,
    pub report_time: SimTime,
    pub entries: Vec<CtiEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CtiTiming {
    /// Minimum gap between report receipt at the OLT and the first usable
    /// grant.
    pub lead_time: SimTime,
    /// DU to OLT delivery delay.
    pub transport_delay: SimTime,
}

impl Default for CtiTiming {
    fn default() -> Self {
        CtiTiming {
            lead_time: SimTime::from_micros(250),
            transport_delay: SimTime::from_micros(20),
        }
    }
}

/// Everything configurable about the interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtiConfig {
    pub lead_time: SimTime,
    pub transport_delay: SimTime,
    /// Each arrival window is widened by this much on both sides.
    pub jitter_margin: SimTime,
    /// DU clock error relative to the PON clock, in signed nanoseconds.
    pub clock_offset_ns: i64,
    /// Emit empty reports on slots without grants.
    pub heartbeat: bool,
    /// Probability that a report is lost in transit.
    pub drop_probability: f64,
}

impl Default for CtiConfig {
    fn default() -> Self {
        let t = CtiTiming::default();
        CtiConfig {
            lead_time: t.lead_time,
            transport_delay: t.transport_delay,
            jitter_margin: SimTime::from_micros(10),
            clock_offset_ns: 0,
            heartbeat: false,
            drop_probability: 0.0,
        }
    }
}

impl CtiConfig {
    pub fn timing(&self) -> CtiTiming {
        CtiTiming {
            lead_time: self.lead_time,
            transport_delay: self.transport_delay,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.drop_probability) {
            out.push(format!(
                "drop_probability must be within [0, 1], got {}",
                self.drop_probability
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CtiError {
    #[error("ue {0} has no TCONT mapping")]
    UnmappedUe(UeId),
    #[error("grant for slot {got} in report for slot {expected}")]
    MixedSlots { expected: u64, got: u64 },
    #[error(transparent)]
    Ran(#[from] RanError),
    #[error("expected bytes for TCONT {0} overflow u32")]
    Overflow(TcontId),
}

/// Inputs shared by every report a DU builds.
#[derive(Debug, Clone, Copy)]
pub struct ReportContext<'a> {
    pub slot: &'a SlotConfig,
    pub iq: &'a IqFormat,
    pub jitter_margin: SimTime,
    pub clock_offset_ns: i64,
}

/// One expected burst: `bytes` landing in `tcont` at `arrival`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Contribution {
    pub tcont_id: TcontId,
    pub bytes: u32,
    pub arrival: SimTime,
}

/// Per-DU report builder; owns the wrapping sequence counter.
#[derive(Debug, Clone, Default)]
pub struct CtiSender {
    next_seq: u16,
    heartbeat: bool,
    emitted: u64,
}

impl CtiSender {
    pub fn new(heartbeat: bool) -> Self {
        CtiSender {
            next_seq: 0,
            heartbeat,
            emitted: 0,
        }
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Report for the grants issued in `slot_index`, one entry per TCONT.
    ///
    /// Returns `None` when there is nothing to announce and heartbeats are
    /// off; no sequence number is consumed in that case.
    pub fn build_report(
        &mut self,
        grants: &[UplinkGrant],
        slot_index: u64,
        ctx: &ReportContext<'_>,
        mapping: &BTreeMap<UeId, TcontId>,
    ) -> Result<Option<CtiReport>, CtiError> {
        let mut contributions = Vec::with_capacity(grants.len());
        for g in grants {
            if g.grant_slot != slot_index {
                return Err(CtiError::MixedSlots {
                    expected: slot_index,
                    got: g.grant_slot,
                });
            }
            let tcont_id = *mapping.get(&g.ue_id).ok_or(CtiError::UnmappedUe(g.ue_id))?;
            let bytes = fronthaul_bytes_for_grant(g, ctx.iq);
            if bytes == 0 {
                continue;
            }
            contributions.push(Contribution {
                tcont_id,
                bytes,
                arrival: arrival_time(g, ctx.slot)?,
            });
        }
        self.build_from(&contributions, slot_index, ctx)
    }

    /// Aggregates arbitrary contributions (grant bursts plus any periodic
    /// control load) into a report.
    pub fn build_from(
        &mut self,
        contributions: &[Contribution],
        slot_index: u64,
        ctx: &ReportContext<'_>,
    ) -> Result<Option<CtiReport>, CtiError> {
        let mut per_tcont: BTreeMap<TcontId, (u64, SimTime, SimTime)> = BTreeMap::new();
        for c in contributions.iter().filter(|c| c.bytes > 0) {
            let slot = per_tcont
                .entry(c.tcont_id)
                .or_insert((0, SimTime::MAX, SimTime::ZERO));
            slot.0 += c.bytes as u64;
            slot.1 = slot.1.min(c.arrival);
            slot.2 = slot.2.max(c.arrival);
        }
        if per_tcont.is_empty() && !self.heartbeat {
            return Ok(None);
        }
        let mut entries = Vec::with_capacity(per_tcont.len());
        for (tcont_id, (bytes, first, last)) in per_tcont {
            let expected_bytes = u32::try_from(bytes).map_err(|_| CtiError::Overflow(tcont_id))?;
            entries.push(CtiEntry {
                tcont_id,
                expected_bytes,
                arrival_start: first
                    .saturating_sub(ctx.jitter_margin)
                    .offset_by(ctx.clock_offset_ns),
                arrival_end: (last + ctx.jitter_margin).offset_by(ctx.clock_offset_ns),
            });
        }
        let report = CtiReport {
            version: VERSION,
            seq: self.next_seq,
            report_time: ctx.slot.slot_start(slot_index).offset_by(ctx.clock_offset_ns),
            entries,
        };
        self.next_seq = self.next_seq.wrapping_add(1);
        self.emitted += 1;
        Ok(Some(report))
    }
}

/// Tracks sequence continuity on the OLT side.
#[derive(Debug, Clone, Default)]
pub struct CtiReceiver {
    last_seq: Option<u16>,
    received: u64,
    gaps: u64,
}

impl CtiReceiver {
    /// Returns how many reports went missing just before this one.
    pub fn observe(&mut self, report: &CtiReport) -> u64 {
        let missing = match self.last_seq {
            Some(prev) => report.seq.wrapping_sub(prev).wrapping_sub(1) as u64,
            None => report.seq as u64,
        };
        self.last_seq = Some(report.seq);
        self.received += 1;
        self.gaps += missing;
        missing
    }

    pub fn received(&self) -> u64 {
        self.received
    }

    pub fn gaps(&self) -> u64 {
        self.gaps
    }
}

/// First instant a grant for `entry` may be placed: no sooner than `lead_time`
/// after the report arrived, and not before the announced window opens.
pub fn earliest_grant_time(receipt: SimTime, timing: &CtiTiming, entry: &CtiEntry) -> SimTime {
    (receipt + timing.lead_time).max(entry.arrival_start)
}
