use super::{AllocKind, Allocation, PonConfig, TcontId};
use crate::sim::SimTime;

/// Free byte ranges of a frame under construction, sorted and disjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gaps {
    free: Vec<(u64, u64)>,
}

impl Gaps {
    pub fn new(capacity: u64) -> Self {
        Gaps {
            free: if capacity > 0 { vec![(0, capacity)] } else { vec![] },
        }
    }

    pub fn total_free(&self) -> u64 {
        self.free.iter().map(|(s, e)| e - s).sum()
    }

    pub fn largest(&self) -> u64 {
        self.free.iter().map(|(s, e)| e - s).max().unwrap_or(0)
    }

    /// Lowest start `>= min_start` where `size` bytes fit.
    pub fn first_fit(&self, min_start: u64, size: u64) -> Option<u64> {
        self.free.iter().find_map(|&(s, e)| {
            let s = s.max(min_start);
            (s < e && e - s >= size).then_some(s)
        })
    }

    /// First range at or after `min_start` at least `min_size` long.
    pub fn first_room(&self, min_start: u64, min_size: u64) -> Option<(u64, u64)> {
        self.free.iter().find_map(|&(s, e)| {
            let s = s.max(min_start);
            (s < e && e - s >= min_size).then_some((s, e - s))
        })
    }

    pub fn largest_room(&self) -> Option<(u64, u64)> {
        self.free
            .iter()
            .map(|&(s, e)| (s, e - s))
            .filter(|&(_, len)| len > 0)
            .max_by_key(|&(s, len)| (len, std::cmp::Reverse(s)))
    }

    /// Marks `[start, start + size)` as used. The range must be free.
    pub fn reserve(&mut self, start: u64, size: u64) {
        let end = start + size;
        let i = self
            .free
            .iter()
            .position(|&(s, e)| s <= start && end <= e)
            .expect("reserved range must lie in a free gap");
        let (s, e) = self.free[i];
        let mut repl = Vec::with_capacity(2);
        if s < start {
            repl.push((s, start));
        }
        if end < e {
            repl.push((end, e));
        }
        self.free.splice(i..=i, repl);
    }
}

/// Splits `total` units over `demands` in proportion to demand.
///
/// Nobody receives more than they asked for. When demand exceeds supply each
/// share is rounded down, every nonzero demand is topped up to one unit if
/// possible, and the rest goes one unit at a time in index order. No share
/// moves more than one unit away from its exact proportional value.
pub fn proportional_fill(total: u64, demands: &[u64]) -> Vec<u64> {
    let sum: u128 = demands.iter().map(|&d| d as u128).sum();
    if sum <= total as u128 {
        return demands.to_vec();
    }
    let mut out: Vec<u64> = demands
        .iter()
        .map(|&d| (total as u128 * d as u128 / sum) as u64)
        .collect();
    let mut left = total - out.iter().sum::<u64>();
    let mut bumped = vec![false; out.len()];
    for i in 0..out.len() {
        if left > 0 && out[i] == 0 && demands[i] > 0 {
            out[i] = 1;
            bumped[i] = true;
            left -= 1;
        }
    }
    for i in 0..out.len() {
        if left > 0 && !bumped[i] && out[i] < demands[i] {
            out[i] += 1;
            left -= 1;
        }
    }
    out
}

pub(crate) fn round_up_4(bytes: u64) -> u64 {
    bytes.div_ceil(4) * 4
}

/// Status-report demand of one TCONT for the frame being built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct SrDemand {
    pub tcont_id: TcontId,
    pub request_bytes: u64,
    pub poll_due: bool,
}

/// Status-report DBA over whatever room `gaps` still has.
///
/// `demands` must be in ascending `tcont_id` order. Data grants are sized
/// proportionally to the requests, never below one fragment header plus one
/// unit, and laid out first-fit. TCONTs due for a poll that got no grant
/// receive a minimum allocation.
pub(crate) fn sr_fill(cfg: &PonConfig, gaps: &mut Gaps, demands: &[SrDemand]) -> Vec<Allocation> {
    let per_burst = cfg.burst_overhead_bytes as u64 + cfg.guard_bytes as u64;
    let requesters: Vec<&SrDemand> = demands.iter().filter(|d| d.request_bytes > 0).collect();
    let polls_reserved = demands
        .iter()
        .filter(|d| d.poll_due && d.request_bytes == 0)
        .count() as u64
        * (per_burst + 4);
    let budget = gaps
        .total_free()
        .saturating_sub(polls_reserved)
        .saturating_sub(requesters.len() as u64 * per_burst);
    // A grant no larger than a fragment header cannot move a split head, so
    // every data grant leaves room for at least one payload unit.
    let min_units = (cfg.xgem_header_bytes as u64 + 4).div_ceil(4);
    let units: Vec<u64> = requesters
        .iter()
        .map(|d| d.request_bytes.div_ceil(4).max(min_units))
        .collect();
    let shares = proportional_fill(budget / 4, &units);

    let mut placed = Vec::new();
    let mut polled = Vec::new();
    for (d, &share) in requesters.iter().zip(&shares) {
        let mut grant = share * 4;
        let start = match gaps.first_fit(0, per_burst + grant) {
            Some(s) if grant > 0 => Some(s),
            _ => match gaps.largest_room() {
                Some((s, len)) if len >= per_burst + 4 && grant > 0 => {
                    grant = grant.min((len - per_burst) / 4 * 4);
                    Some(s)
                }
                _ => None,
            },
        };
        match start {
            Some(s) => {
                gaps.reserve(s, per_burst + grant);
                placed.push(Allocation {
                    tcont_id: d.tcont_id,
                    start_offset: s as u32,
                    grant_bytes: grant as u32,
                    kind: AllocKind::Data,
                });
            }
            None if d.poll_due => polled.push(d.tcont_id),
            None => {}
        }
    }
    polled.extend(
        demands
            .iter()
            .filter(|d| d.poll_due && d.request_bytes == 0)
            .map(|d| d.tcont_id),
    );
    polled.sort_unstable();
    for tcont_id in polled {
        if let Some(s) = gaps.first_fit(0, per_burst + 4) {
            gaps.reserve(s, per_burst + 4);
            placed.push(Allocation {
                tcont_id,
                start_offset: s as u32,
                grant_bytes: 4,
                kind: AllocKind::Poll,
            });
        }
    }
    placed
}

/// CTI-announced bytes waiting for a grant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct PendingEntry {
    pub tcont_id: TcontId,
    pub bytes: u64,
    /// No grant data may start before this instant.
    pub place_at: SimTime,
    /// Announced arrival with the jitter margin removed.
    pub nominal_arrival: SimTime,
}

/// Outcome of trying to place one pending entry into a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Placement {
    Whole(Allocation),
    /// Part of the entry fit; `remaining` bytes still need a grant.
    Partial { alloc: Allocation, remaining: u64 },
    None,
}

/// Places `entry` at the earliest offset in the frame starting at
/// `frame_start` whose data does not begin before `entry.place_at`.
pub(crate) fn place_entry(
    cfg: &PonConfig,
    gaps: &mut Gaps,
    frame_start: SimTime,
    entry: &PendingEntry,
) -> Placement {
    let ovh = cfg.burst_overhead_bytes as u64;
    let per_burst = ovh + cfg.guard_bytes as u64;
    let min_data = match entry.place_at.checked_sub(frame_start) {
        Some(d) => cfg.time_to_bytes(d),
        None => 0,
    };
    let min_start = min_data.saturating_sub(ovh);
    let grant = round_up_4(entry.bytes);
    if let Some(s) = gaps.first_fit(min_start, per_burst + grant) {
        gaps.reserve(s, per_burst + grant);
        return Placement::Whole(Allocation {
            tcont_id: entry.tcont_id,
            start_offset: s as u32,
            grant_bytes: grant as u32,
            kind: AllocKind::Data,
        });
    }
    // Too big for any room: send a leading chunk now. A chunk boundary can
    // split one packet, which then pays a header on both sides.
    let hdr2 = 2 * cfg.xgem_header_bytes as u64;
    let min_chunk = round_up_4(hdr2 + 4);
    if let Some((s, len)) = gaps.first_room(min_start, per_burst + min_chunk) {
        let chunk = (len - per_burst) / 4 * 4;
        gaps.reserve(s, per_burst + chunk);
        return Placement::Partial {
            alloc: Allocation {
                tcont_id: entry.tcont_id,
                start_offset: s as u32,
                grant_bytes: chunk as u32,
                kind: AllocKind::Data,
            },
            remaining: entry.bytes + hdr2 - chunk,
        };
    }
    Placement::None
}
