use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{PonConfig, TcontId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocKind {
    Data,
    /// Minimum allocation that only carries a status report.
    Poll,
}

/// One upstream burst opportunity.
///
/// The burst occupies `[start_offset, start_offset + overhead + grant_bytes)`
/// followed by the guard; data begins after the burst overhead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    pub tcont_id: TcontId,
    pub start_offset: u32,
    pub grant_bytes: u32,
    pub kind: AllocKind,
}

impl Allocation {
    pub fn data_offset(&self, cfg: &PonConfig) -> u32 {
        self.start_offset + cfg.burst_overhead_bytes
    }

    /// Bytes of frame consumed, guard included.
    pub fn footprint(&self, cfg: &PonConfig) -> u64 {
        cfg.burst_overhead_bytes as u64 + self.grant_bytes as u64 + cfg.guard_bytes as u64
    }

    pub fn end(&self, cfg: &PonConfig) -> u64 {
        self.start_offset as u64 + self.footprint(cfg)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BwMap {
    pub frame_index: u64,
    pub allocations: Vec<Allocation>,
}

impl BwMap {
    pub fn new(frame_index: u64) -> Self {
        BwMap {
            frame_index,
            allocations: Vec::new(),
        }
    }

    pub fn granted_bytes(&self) -> u64 {
        self.allocations.iter().map(|a| a.grant_bytes as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// Bursts (overhead plus grant) of two allocations intersect.
    Overlap { first: usize, second: usize },
    /// Bursts are disjoint but the earlier one's guard runs into the later.
    GuardViolation { first: usize, second: usize },
    CapacityExceeded { total: u64, capacity: u64 },
    Granularity { index: usize, grant_bytes: u32 },
    OutOfFrame { index: usize, end: u64 },
    Unsorted { index: usize },
}

/// Checks every bandwidth map invariant; an empty result means valid.
pub fn validate_bwmap(map: &BwMap, cfg: &PonConfig) -> Vec<Violation> {
    let capacity = cfg.frame_capacity_bytes() as u64;
    let mut out = Vec::new();
    let allocs = &map.allocations;

    for (i, a) in allocs.iter().enumerate() {
        if a.grant_bytes < 4 || a.grant_bytes % 4 != 0 {
            out.push(Violation::Granularity {
                index: i,
                grant_bytes: a.grant_bytes,
            });
        }
        if a.end(cfg) > capacity {
            out.push(Violation::OutOfFrame {
                index: i,
                end: a.end(cfg),
            });
        }
        if i > 0 && allocs[i - 1].start_offset > a.start_offset {
            out.push(Violation::Unsorted { index: i });
        }
    }

    let total: u64 = allocs.iter().map(|a| a.footprint(cfg)).sum();
    if total > capacity {
        out.push(Violation::CapacityExceeded { total, capacity });
    }

    // Sweep in start order, tracking the allocation reaching furthest so far.
    let mut order: Vec<usize> = (0..allocs.len()).collect();
    order.sort_by_key(|&i| (allocs[i].start_offset, i));
    let mut reach: Option<usize> = None;
    for &j in &order {
        if let Some(r) = reach {
            let prev = &allocs[r];
            let burst_end = prev.start_offset as u64
                + cfg.burst_overhead_bytes as u64
                + prev.grant_bytes as u64;
            let start = allocs[j].start_offset as u64;
            let (first, second) = (r.min(j), r.max(j));
            if burst_end > start {
                out.push(Violation::Overlap { first, second });
            } else if prev.end(cfg) > start {
                out.push(Violation::GuardViolation { first, second });
            }
        }
        if reach.is_none_or(|r| allocs[j].end(cfg) > allocs[r].end(cfg)) {
            reach = Some(j);
        }
    }
    out
}

pub const BWMAP_TRACE_HEADER: &str = "# bwmap-trace v1";

/// Appends one line per allocation: `<frame> <tcont> <start_offset> <grant_bytes>`.
pub fn write_bwmap_trace(out: &mut String, map: &BwMap) {
    for a in &map.allocations {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            map.frame_index, a.tcont_id, a.start_offset, a.grant_bytes
        );
    }
}

/// Parses a trace back into `(frame, tcont, start_offset, grant_bytes)`
/// tuples. Blank lines and `#` comments are skipped.
pub fn parse_bwmap_trace(text: &str) -> Result<Vec<(u64, TcontId, u32, u32)>, String> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || format!("line {}: expected 4 integer fields, got {line:?}", n + 1);
        if f.len() != 4 {
            return Err(bad());
        }
        rows.push((
            f[0].parse().map_err(|_| bad())?,
            f[1].parse().map_err(|_| bad())?,
            f[2].parse().map_err(|_| bad())?,
            f[3].parse().map_err(|_| bad())?,
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn alloc(tcont_id: TcontId, start_offset: u32, grant_bytes: u32) -> Allocation {
        Allocation {
            tcont_id,
            start_offset,
            grant_bytes,
            kind: AllocKind::Data,
        }
    }

    fn map(allocations: Vec<Allocation>) -> BwMap {
        BwMap {
            frame_index: 0,
            allocations,
        }
    }

    #[test]
    fn empty_map_is_valid() {
        assert!(validate_bwmap(&map(vec![]), &PonConfig::default()).is_empty());
    }

    #[test]
    fn adjacent_grants_without_guard_room_overlap() {
        // 0 + 1000 + 64 > 1000 even before burst overhead is counted.
        let cfg = PonConfig::default();
        let v = validate_bwmap(&map(vec![alloc(1, 0, 1000), alloc(2, 1000, 1000)]), &cfg);
        assert_eq!(v, vec![Violation::Overlap { first: 0, second: 1 }]);
    }

    #[test]
    fn guard_only_intrusion_is_reported_separately() {
        let cfg = PonConfig {
            burst_overhead_bytes: 0,
            ..PonConfig::default()
        };
        let v = validate_bwmap(&map(vec![alloc(1, 0, 1000), alloc(2, 1000, 1000)]), &cfg);
        assert_eq!(v, vec![Violation::GuardViolation { first: 0, second: 1 }]);
        let ok = validate_bwmap(&map(vec![alloc(1, 0, 1000), alloc(2, 1064, 1000)]), &cfg);
        assert!(ok.is_empty());
    }

    #[test]
    fn oversubscribed_map_exceeds_capacity() {
        let cfg = PonConfig::default();
        let v = validate_bwmap(&map(vec![alloc(1, 0, 100_000), alloc(2, 100_104, 100_000)]), &cfg);
        assert!(v.iter().any(|v| matches!(v, Violation::CapacityExceeded { .. })));
    }

    #[test]
    fn granularity_is_four_bytes() {
        let cfg = PonConfig::default();
        let v = validate_bwmap(&map(vec![alloc(1, 0, 3_781)]), &cfg);
        assert_eq!(
            v,
            vec![Violation::Granularity {
                index: 0,
                grant_bytes: 3_781
            }]
        );
        assert!(!validate_bwmap(&map(vec![alloc(1, 0, 0)]), &cfg).is_empty());
    }

    #[test]
    fn unsorted_map_is_flagged() {
        let cfg = PonConfig::default();
        let v = validate_bwmap(&map(vec![alloc(1, 5_000, 100), alloc(2, 0, 100)]), &cfg);
        assert_eq!(v, vec![Violation::Unsorted { index: 1 }]);
    }

    #[test]
    fn nested_overlap_is_found() {
        // A long allocation covering two short ones further along.
        let cfg = PonConfig::default();
        let v = validate_bwmap(
            &map(vec![alloc(1, 0, 10_000), alloc(2, 2_000, 100), alloc(3, 5_000, 100)]),
            &cfg,
        );
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn trace_round_trip() {
        let m = BwMap {
            frame_index: 42,
            allocations: vec![alloc(1, 0, 3_780), alloc(7, 3_884, 4)],
        };
        let mut s = String::from(BWMAP_TRACE_HEADER);
        s.push('\n');
        write_bwmap_trace(&mut s, &m);
        assert_eq!(s, "# bwmap-trace v1\n42 1 0 3780\n42 7 3884 4\n");
        assert_eq!(
            parse_bwmap_trace(&s).unwrap(),
            vec![(42, 1, 0, 3_780), (42, 7, 3_884, 4)]
        );
        assert!(parse_bwmap_trace("1 2 3").is_err());
    }

    /// Marks every byte each footprint covers and looks for double use.
    fn brute_force_collision(m: &BwMap, cfg: &PonConfig) -> bool {
        let allocs = &m.allocations;
        for i in 0..allocs.len() {
            for j in (i + 1)..allocs.len() {
                let (a0, a1) = (allocs[i].start_offset as u64, allocs[i].end(cfg));
                let (b0, b1) = (allocs[j].start_offset as u64, allocs[j].end(cfg));
                if a0 < b1 && b0 < a1 {
                    return true;
                }
            }
        }
        false
    }

    fn arb_map() -> impl Strategy<Value = BwMap> {
        proptest::collection::vec((0u16..8, 0u32..20_000, 1u32..2_000), 0..=64).prop_map(|v| {
            let mut allocations: Vec<Allocation> = v
                .into_iter()
                .map(|(t, s, g)| alloc(t, s * 4, g * 4))
                .collect();
            allocations.sort_by_key(|a| a.start_offset);
            BwMap {
                frame_index: 0,
                allocations,
            }
        })
    }

    proptest! {
        #[test]
        fn validator_agrees_with_brute_force(m in arb_map()) {
            let cfg = PonConfig::default();
            let v = validate_bwmap(&m, &cfg);
            let flagged = v.iter().any(|v| matches!(
                v,
                Violation::Overlap { .. } | Violation::GuardViolation { .. }
            ));
            prop_assert_eq!(flagged, brute_force_collision(&m, &cfg));
        }
    }
}
