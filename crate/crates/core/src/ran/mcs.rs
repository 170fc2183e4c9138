use serde::{Deserialize, Serialize};

use super::RanError;

pub const SUBCARRIERS_PER_PRB: u64 = 12;
pub const SYMBOLS_PER_SLOT: u64 = 14;

/// Modulation order and code rate selected by an MCS index.
///
/// Code rate is kept as an integer numerator over 1024 so transport block
/// sizing stays exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mcs {
    pub bits_per_symbol: u32,
    pub code_rate_x1024: u32,
}

impl Mcs {
    pub fn code_rate(&self) -> f64 {
        self.code_rate_x1024 as f64 / 1024.0
    }
}

const fn mcs(bits_per_symbol: u32, code_rate_x1024: u32) -> Mcs {
    Mcs {
        bits_per_symbol,
        code_rate_x1024,
    }
}

/// Simplified MCS table: QPSK through 256QAM.
pub const MCS_TABLE: [Mcs; 11] = [
    mcs(2, 256), // QPSK 1/4
    mcs(2, 512), // QPSK 1/2
    mcs(2, 768), // QPSK 3/4
    mcs(4, 512), // 16QAM 1/2
    mcs(4, 768), // 16QAM 3/4
    mcs(6, 512), // 64QAM 1/2
    mcs(6, 768), // 64QAM 3/4
    mcs(6, 896), // 64QAM 7/8
    mcs(8, 768), // 256QAM 3/4
    mcs(8, 896), // 256QAM 7/8
    mcs(8, 948), // 256QAM ~0.93
];

pub const MCS_QPSK_HALF: u8 = 1;
pub const MCS_64QAM_THREE_QUARTERS: u8 = 6;
pub const MCS_256QAM_MAX: u8 = 10;

pub fn mcs_entry(index: u8) -> Result<Mcs, RanError> {
    MCS_TABLE
        .get(index as usize)
        .copied()
        .ok_or(RanError::UnknownMcs(index))
}

/// Resource-element product: `floor(prbs * 12 * 14 * bits * rate / 8)`.
pub fn tbs_from_prbs(n_prbs: u32, mcs_index: u8) -> Result<u32, RanError> {
    let m = mcs_entry(mcs_index)?;
    Ok(tbs_for(n_prbs, m))
}

pub(crate) fn tbs_for(n_prbs: u32, m: Mcs) -> u32 {
    let bits_x1024 = n_prbs as u64
        * SUBCARRIERS_PER_PRB
        * SYMBOLS_PER_SLOT
        * m.bits_per_symbol as u64
        * m.code_rate_x1024 as u64;
    (bits_x1024 / (8 * 1024)) as u32
}

/// Smallest PRB count whose transport block holds `bytes`.
pub(crate) fn prbs_needed(bytes: u64, m: Mcs) -> u64 {
    if bytes == 0 {
        return 0;
    }
    let per_prb_x8192 =
        SUBCARRIERS_PER_PRB * SYMBOLS_PER_SLOT * m.bits_per_symbol as u64 * m.code_rate_x1024 as u64;
    (bytes * 8 * 1024).div_ceil(per_prb_x8192)
}
