use serde::{Deserialize, Serialize};

use super::mcs::{SUBCARRIERS_PER_PRB, SYMBOLS_PER_SLOT};
use super::{RanError, SlotConfig, UplinkGrant};
use crate::sim::SimTime;

/// Uplink IQ encoding of the fronthaul user plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawIqFormat", into = "RawIqFormat")]
pub struct IqFormat {
    bitwidth: u8,
    per_symbol_overhead: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIqFormat {
    #[serde(default = "default_bitwidth")]
    iq_bitwidth: u8,
    #[serde(default = "default_overhead")]
    per_symbol_overhead: u32,
}

fn default_bitwidth() -> u8 {
    9
}

fn default_overhead() -> u32 {
    36
}

impl TryFrom<RawIqFormat> for IqFormat {
    type Error = RanError;
    fn try_from(raw: RawIqFormat) -> Result<Self, RanError> {
        IqFormat::new(raw.iq_bitwidth, raw.per_symbol_overhead)
    }
}

impl From<IqFormat> for RawIqFormat {
    fn from(f: IqFormat) -> Self {
        RawIqFormat {
            iq_bitwidth: f.bitwidth,
            per_symbol_overhead: f.per_symbol_overhead,
        }
    }
}

impl Default for IqFormat {
    /// 9-bit block-floating-point IQ with 36 bytes of Ethernet/eCPRI framing
    /// per symbol.
    fn default() -> Self {
        IqFormat {
            bitwidth: default_bitwidth(),
            per_symbol_overhead: default_overhead(),
        }
    }
}

impl IqFormat {
    pub fn new(bitwidth: u8, per_symbol_overhead: u32) -> Result<Self, RanError> {
        if !(4..=16).contains(&bitwidth) {
            return Err(RanError::InvalidBitwidth(bitwidth));
        }
        Ok(IqFormat {
            bitwidth,
            per_symbol_overhead,
        })
    }

    pub fn bitwidth(&self) -> u8 {
        self.bitwidth
    }

    pub fn per_symbol_overhead(&self) -> u32 {
        self.per_symbol_overhead
    }
}

/// Fronthaul bytes for `n_prbs` of frequency-domain IQ over one slot.
///
/// I and Q samples for each granted subcarrier, rounded up to whole bytes per
/// symbol (a no-op for whole PRBs, which are always 3 * bitwidth bytes), plus per-symbol framing. Zero PRBs emit no sections at all.
pub fn fronthaul_bytes_for_prbs(n_prbs: u32, fmt: &IqFormat) -> u32 {
    if n_prbs == 0 {
        return 0;
    }
    let bits_per_symbol = n_prbs as u64 * SUBCARRIERS_PER_PRB * 2 * fmt.bitwidth as u64;
    let per_symbol = bits_per_symbol.div_ceil(8) + fmt.per_symbol_overhead as u64;
    (per_symbol * SYMBOLS_PER_SLOT) as u32
}

pub fn fronthaul_bytes_for_grant(grant: &UplinkGrant, fmt: &IqFormat) -> u32 {
    fronthaul_bytes_for_prbs(grant.n_prbs, fmt)
}

/// Instant the grant's fronthaul burst reaches the ONU ingress:
/// end of the transmission slot plus RU processing, minus the DU timing
/// advance.
pub fn arrival_time(grant: &UplinkGrant, cfg: &SlotConfig) -> Result<SimTime, RanError> {
    let nominal =
        cfg.slot_start(grant.tx_slot) + cfg.slot_duration + cfg.ru_processing_delay;
    nominal
        .checked_sub(cfg.du_timing_advance)
        .ok_or(RanError::NegativeArrival {
            tx_slot: grant.tx_slot,
            arrival: nominal,
            advance: cfg.du_timing_advance,
        })
}
