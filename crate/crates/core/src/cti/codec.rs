//! CTI wire format, big-endian throughout.
//!
//! ```text
//! header (18 bytes)
//!   0..4    magic            "CTI1"
//!   4       version          u8 = 1
//!   5       msg_type         u8 = 1 (grant report)
//!   6..8    seq              u16
//!   8..16   report_time_ns   u64
//!   16..18  entry_count      u16
//! entry (22 bytes each)
//!   0..2    tcont_id         u16
//!   2..6    expected_bytes   u32
//!   6..14   arrival_start_ns u64
//!   14..22  arrival_end_ns   u64
//! ```

use thiserror::Error;

use super::{CtiEntry, CtiReport};
use crate::sim::SimTime;

pub const MAGIC: [u8; 4] = *b"CTI1";
pub const VERSION: u8 = 1;
pub const MSG_TYPE_GRANT_REPORT: u8 = 1;
pub const HEADER_LEN: usize = 18;
pub const ENTRY_LEN: usize = 22;
pub const MAX_ENTRIES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("{0} entries exceed the per-report limit of {MAX_ENTRIES}")]
    TooManyEntries(usize),
    #[error("cannot encode report version {0}")]
    UnsupportedVersion(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("message truncated: {len} bytes, header needs {HEADER_LEN}")]
    Truncated { len: usize },
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported message type {0}")]
    UnsupportedMessageType(u8),
    #[error("entry count {0} exceeds limit of {MAX_ENTRIES}")]
    TooManyEntries(usize),
    #[error("length {actual} inconsistent with {entries} entries (expected {expected})")]
    LengthMismatch {
        entries: usize,
        expected: usize,
        actual: usize,
    },
    #[error("entry {index}: {reason}")]
    InvalidEntry { index: usize, reason: &'static str },
}

pub fn encoded_len(entries: usize) -> usize {
    HEADER_LEN + ENTRY_LEN * entries
}

pub fn encode(report: &CtiReport) -> Result<Vec<u8>, EncodeError> {
    if report.version != VERSION {
        return Err(EncodeError::UnsupportedVersion(report.version));
    }
    let n = report.entries.len();
    if n > MAX_ENTRIES {
        return Err(EncodeError::TooManyEntries(n));
    }
    let mut out = Vec::with_capacity(encoded_len(n));
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(MSG_TYPE_GRANT_REPORT);
    out.extend_from_slice(&report.seq.to_be_bytes());
    out.extend_from_slice(&report.report_time.as_nanos().to_be_bytes());
    out.extend_from_slice(&(n as u16).to_be_bytes());
    for e in &report.entries {
        out.extend_from_slice(&e.tcont_id.to_be_bytes());
        out.extend_from_slice(&e.expected_bytes.to_be_bytes());
        out.extend_from_slice(&e.arrival_start.as_nanos().to_be_bytes());
        out.extend_from_slice(&e.arrival_end.as_nanos().to_be_bytes());
    }
    Ok(out)
}

fn be_u16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

fn be_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

fn be_u64(b: &[u8]) -> u64 {
    let mut a = [0u8; 8];
    a.copy_from_slice(&b[..8]);
    u64::from_be_bytes(a)
}

pub fn decode(bytes: &[u8]) -> Result<CtiReport, DecodeError> {
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError::Truncated { len: bytes.len() });
    }
    let magic = [bytes[0], bytes[1], bytes[2], bytes[3]];
    if magic != MAGIC {
        return Err(DecodeError::BadMagic(magic));
    }
    if bytes[4] != VERSION {
        return Err(DecodeError::UnsupportedVersion(bytes[4]));
    }
    if bytes[5] != MSG_TYPE_GRANT_REPORT {
        return Err(DecodeError::UnsupportedMessageType(bytes[5]));
    }
    let seq = be_u16(&bytes[6..]);
    let report_time = SimTime::from_nanos(be_u64(&bytes[8..]));
    let count = be_u16(&bytes[16..]) as usize;
    if count > MAX_ENTRIES {
        return Err(DecodeError::TooManyEntries(count));
    }
    let expected = encoded_len(count);
    if bytes.len() != expected {
        return Err(DecodeError::LengthMismatch {
            entries: count,
            expected,
            actual: bytes.len(),
        });
    }
    let mut entries = Vec::with_capacity(count);
    for (index, chunk) in bytes[HEADER_LEN..].chunks_exact(ENTRY_LEN).enumerate() {
        let entry = CtiEntry {
            tcont_id: be_u16(chunk),
            expected_bytes: be_u32(&chunk[2..]),
            arrival_start: SimTime::from_nanos(be_u64(&chunk[6..])),
            arrival_end: SimTime::from_nanos(be_u64(&chunk[14..])),
        };
        if entry.expected_bytes == 0 {
            return Err(DecodeError::InvalidEntry {
                index,
                reason: "expected_bytes is zero",
            });
        }
        if entry.arrival_start > entry.arrival_end {
            return Err(DecodeError::InvalidEntry {
                index,
                reason: "arrival window is inverted",
            });
        }
        entries.push(entry);
    }
    Ok(CtiReport {
        version: VERSION,
        seq,
        report_time,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(tcont_id: u16, bytes: u32) -> CtiEntry {
        CtiEntry {
            tcont_id,
            expected_bytes: bytes,
            arrival_start: SimTime::from_micros(1_040),
            arrival_end: SimTime::from_micros(1_060),
        }
    }

    fn report(entries: Vec<CtiEntry>) -> CtiReport {
        CtiReport {
            version: VERSION,
            seq: 0x1234,
            report_time: SimTime::from_millis(1),
            entries,
        }
    }

    #[test]
    fn header_only_message_is_18_bytes() {
        assert_eq!(encode(&report(vec![])).unwrap().len(), 18);
    }

    #[test]
    fn three_entries_take_84_bytes() {
        let r = report(vec![entry(1, 10), entry(2, 20), entry(3, 30)]);
        assert_eq!(encode(&r).unwrap().len(), 84);
    }

    #[test]
    fn magic_leads_every_message() {
        let bytes = encode(&report(vec![entry(7, 3_780)])).unwrap();
        assert_eq!(&bytes[..4], &[0x43, 0x54, 0x49, 0x31]);
    }

    #[test]
    fn bit_exact_layout() {
        let r = CtiReport {
            version: 1,
            seq: 0x0102,
            report_time: SimTime::from_nanos(0x0A0B_0C0D),
            entries: vec![CtiEntry {
                tcont_id: 0x0304,
                expected_bytes: 0x0000_0EC4,
                arrival_start: SimTime::from_nanos(0x10),
                arrival_end: SimTime::from_nanos(0x20),
            }],
        };
        let expected: Vec<u8> = [
            &b"CTI1"[..],
            &[1, 1, 0x01, 0x02],
            &[0, 0, 0, 0, 0x0A, 0x0B, 0x0C, 0x0D],
            &[0, 1],
            &[0x03, 0x04, 0, 0, 0x0E, 0xC4],
            &[0, 0, 0, 0, 0, 0, 0, 0x10],
            &[0, 0, 0, 0, 0, 0, 0, 0x20],
        ]
        .concat();
        assert_eq!(encode(&r).unwrap(), expected);
        assert_eq!(decode(&expected).unwrap(), r);
    }

    #[test]
    fn entry_overflow_is_rejected() {
        let r = report(vec![entry(1, 1); MAX_ENTRIES + 1]);
        assert_eq!(encode(&r), Err(EncodeError::TooManyEntries(MAX_ENTRIES + 1)));
        assert!(encode(&report(vec![entry(1, 1); MAX_ENTRIES])).is_ok());
    }

    #[test]
    fn seventeen_bytes_is_truncated() {
        let bytes = encode(&report(vec![])).unwrap();
        assert_eq!(
            decode(&bytes[..17]),
            Err(DecodeError::Truncated { len: 17 })
        );
    }

    #[test]
    fn short_body_is_a_length_error() {
        let mut bytes = encode(&report(vec![entry(1, 5)])).unwrap();
        bytes[17] = 2;
        assert_eq!(
            decode(&bytes),
            Err(DecodeError::LengthMismatch {
                entries: 2,
                expected: 62,
                actual: 40
            })
        );
    }

    #[test]
    fn each_header_fault_has_its_own_error() {
        let good = encode(&report(vec![entry(1, 5)])).unwrap();

        let mut b = good.clone();
        b[0] = b'X';
        assert!(matches!(decode(&b), Err(DecodeError::BadMagic(_))));

        let mut b = good.clone();
        b[4] = 2;
        assert_eq!(decode(&b), Err(DecodeError::UnsupportedVersion(2)));

        let mut b = good.clone();
        b[5] = 9;
        assert_eq!(decode(&b), Err(DecodeError::UnsupportedMessageType(9)));

        let mut b = good.clone();
        b[16] = 0xFF;
        assert!(matches!(decode(&b), Err(DecodeError::TooManyEntries(_))));

        let mut b = good.clone();
        b[20..24].copy_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(
            decode(&b),
            Err(DecodeError::InvalidEntry { index: 0, .. })
        ));

        let mut b = good;
        b.push(0);
        assert!(matches!(decode(&b), Err(DecodeError::LengthMismatch { .. })));
    }

    #[test]
    fn encoding_wrong_version_fails() {
        let mut r = report(vec![]);
        r.version = 3;
        assert_eq!(encode(&r), Err(EncodeError::UnsupportedVersion(3)));
    }
}
