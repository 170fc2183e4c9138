use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::dba::{place_entry, sr_fill, Gaps, PendingEntry, Placement, SrDemand};
use super::{
    validate_bwmap, AllocKind, BwMap, DbaMode, EnqueueOutcome, LatencySample, OnuId, PonConfig,
    PonError, TcontId, TcontQueue, TrafficClass, Violation,
};
use crate::cti::{earliest_grant_time, CtiConfig, CtiReport, CtiTiming};
use crate::ran::FronthaulPacket;
use crate::sim::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcontSpec {
    pub tcont_id: TcontId,
    pub onu_id: OnuId,
    pub class: TrafficClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnuLink {
    pub onu_id: OnuId,
    /// One-way propagation between this ONU and the OLT.
    pub propagation: SimTime,
}

/// Queue status piggybacked on the end of every burst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusReport {
    pub tcont_id: TcontId,
    /// Grant bytes needed to empty what had arrived by `taken_at`.
    pub requirement: u64,
    pub taken_at: SimTime,
    pub rx_at: SimTime,
}

/// What one executed frame did.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameOutcome {
    pub frame_index: u64,
    pub frame_start: SimTime,
    pub samples: Vec<LatencySample>,
    pub granted_bytes: u64,
    /// Grant bytes actually filled: payload, fragment headers and poll
    /// reports.
    pub used_bytes: u64,
    pub wasted_bytes: u64,
    pub allocations: u32,
    pub violations: Vec<Violation>,
    pub unknown_tcont: u32,
}

/// A grant already committed to a map, remembered so status reports taken
/// before it starts are not granted twice.
#[derive(Debug, Clone, Copy)]
struct Issued {
    data_start: SimTime,
    bytes: u64,
    /// For CTI grants, the announced arrival of the bytes they carry. Such a
    /// grant only offsets a report that already includes those bytes.
    covers_arrival: Option<SimTime>,
}

#[derive(Debug, Clone)]
struct TcontState {
    queue: TcontQueue,
    propagation: SimTime,
    last_report: Option<StatusReport>,
    last_alloc_frame: Option<u64>,
    issued: VecDeque<Issued>,
}

/// OLT plus the ONU queues it serves.
///
/// Driven at frame boundaries: [`Olt::execute_frame`] plays out the map for
/// a frame that just ended and [`Olt::compute_map`] builds the map for a
/// frame [`Olt::lag_frames`] ahead.
#[derive(Debug, Clone)]
pub struct Olt {
    cfg: PonConfig,
    timing: CtiTiming,
    jitter_margin: SimTime,
    mode: DbaMode,
    tconts: BTreeMap<TcontId, TcontState>,
    pending: Vec<PendingEntry>,
    maps: BTreeMap<u64, BwMap>,
    inflight: Vec<StatusReport>,
    lag: u64,
    cti_entries_accepted: u64,
    cti_entries_unknown: u64,
}

impl Olt {
    pub fn new(
        cfg: PonConfig,
        cti: &CtiConfig,
        onus: &[OnuLink],
        tconts: &[TcontSpec],
        mode: DbaMode,
    ) -> Result<Self, PonError> {
        let links: BTreeMap<OnuId, SimTime> =
            onus.iter().map(|o| (o.onu_id, o.propagation)).collect();
        let mut states = BTreeMap::new();
        for t in tconts {
            let propagation = *links.get(&t.onu_id).ok_or(PonError::UnknownOnu {
                tcont: t.tcont_id,
                onu: t.onu_id,
            })?;
            let queue = TcontQueue::new(t.tcont_id, t.onu_id, t.class, cfg.max_queue_bytes);
            let state = TcontState {
                queue,
                propagation,
                last_report: None,
                last_alloc_frame: None,
                issued: VecDeque::new(),
            };
            if states.insert(t.tcont_id, state).is_some() {
                return Err(PonError::DuplicateTcont(t.tcont_id));
            }
        }
        let max_prop = links.values().copied().max().unwrap_or(SimTime::ZERO);
        let lag = cfg.map_lag_frames(max_prop);
        Ok(Olt {
            cfg,
            timing: cti.timing(),
            jitter_margin: cti.jitter_margin,
            mode,
            tconts: states,
            pending: Vec::new(),
            maps: BTreeMap::new(),
            inflight: Vec::new(),
            lag,
            cti_entries_accepted: 0,
            cti_entries_unknown: 0,
        })
    }

    pub fn config(&self) -> &PonConfig {
        &self.cfg
    }

    pub fn mode(&self) -> DbaMode {
        self.mode
    }

    /// Switching to the baseline forgets every announced-but-unplaced entry.
    pub fn set_mode(&mut self, mode: DbaMode) {
        if mode == DbaMode::Sr {
            self.pending.clear();
        }
        self.mode = mode;
    }

    pub fn lag_frames(&self) -> u64 {
        self.lag
    }

    pub fn queue(&self, tcont: TcontId) -> Option<&TcontQueue> {
        self.tconts.get(&tcont).map(|s| &s.queue)
    }

    pub fn queues(&self) -> impl Iterator<Item = &TcontQueue> {
        self.tconts.values().map(|s| &s.queue)
    }

    pub fn pending_entries(&self) -> usize {
        self.pending.len()
    }

    pub fn cti_entries_accepted(&self) -> u64 {
        self.cti_entries_accepted
    }

    pub fn cti_entries_unknown(&self) -> u64 {
        self.cti_entries_unknown
    }

    pub fn enqueue(
        &mut self,
        tcont: TcontId,
        packet: FronthaulPacket,
        now: SimTime,
    ) -> Result<EnqueueOutcome, PonError> {
        if packet.bytes == 0 {
            return Err(PonError::EmptyPacket(tcont));
        }
        let state = self
            .tconts
            .get_mut(&tcont)
            .ok_or(PonError::UnknownTcont(tcont))?;
        Ok(state.queue.enqueue(packet, now))
    }

    /// Takes in a CTI report received at `receipt`. Ignored outside CTI
    /// mode.
    pub fn on_cti_report(&mut self, report: &CtiReport, receipt: SimTime) {
        if self.mode != DbaMode::Cti {
            return;
        }
        for e in &report.entries {
            if !self.tconts.contains_key(&e.tcont_id) {
                self.cti_entries_unknown += 1;
                continue;
            }
            // Grants start once the whole window has opened, so announced data
            // is never granted ahead of its arrival.
            let place_at = earliest_grant_time(receipt, &self.timing, e).max(e.arrival_end);
            let entry = PendingEntry {
                tcont_id: e.tcont_id,
                bytes: e.expected_bytes as u64,
                place_at,
                nominal_arrival: e.arrival_end.saturating_sub(self.jitter_margin),
            };
            let at = self.pending.partition_point(|p| p.place_at <= place_at);
            self.pending.insert(at, entry);
            self.cti_entries_accepted += 1;
        }
    }

    fn absorb_reports(&mut self, now: SimTime) {
        let (ready, waiting): (Vec<_>, Vec<_>) =
            self.inflight.drain(..).partition(|r| r.rx_at <= now);
        self.inflight = waiting;
        for r in ready {
            let Some(state) = self.tconts.get_mut(&r.tcont_id) else {
                continue;
            };
            if state.last_report.is_none_or(|l| l.taken_at <= r.taken_at) {
                state.last_report = Some(r);
                while state
                    .issued
                    .front()
                    .is_some_and(|i| i.data_start <= r.taken_at)
                {
                    state.issued.pop_front();
                }
            }
        }
    }

    fn sr_request(&self, tcont: TcontId) -> u64 {
        let state = &self.tconts[&tcont];
        let Some(rep) = state.last_report else {
            return 0;
        };
        let seen = |arrival: SimTime| arrival <= rep.taken_at;
        let granted: u64 = state
            .issued
            .iter()
            .filter(|i| i.data_start > rep.taken_at && i.covers_arrival.is_none_or(seen))
            .map(|i| i.bytes)
            .sum();
        let announced: u64 = self
            .pending
            .iter()
            .filter(|p| p.tcont_id == tcont && seen(p.nominal_arrival))
            .map(|p| p.bytes)
            .sum();
        rep.requirement.saturating_sub(granted + announced)
    }

    /// Builds and stores the map for `frame_index` using what the OLT knows
    /// at `now`.
    pub fn compute_map(&mut self, frame_index: u64, now: SimTime) -> BwMap {
        self.absorb_reports(now);
        let cfg = self.cfg.clone();
        let fs = cfg.frame_start(frame_index);
        let fe = fs + cfg.frame_duration;
        let mut gaps = Gaps::new(cfg.usable_capacity_bytes() as u64);
        let mut allocations = Vec::new();

        if self.mode == DbaMode::Cti {
            let mut carry = Vec::new();
            let due: Vec<PendingEntry> = {
                let split = self.pending.partition_point(|p| p.place_at < fe);
                self.pending.drain(..split).collect()
            };
            for entry in due {
                let data_start = |a: &super::Allocation| fs + cfg.bytes_to_time(a.data_offset(&cfg) as u64);
                match place_entry(&cfg, &mut gaps, fs, &entry) {
                    Placement::Whole(a) => {
                        self.record_issue(&a, data_start(&a), Some(entry.nominal_arrival), frame_index);
                        allocations.push(a);
                    }
                    Placement::Partial { alloc, remaining } => {
                        self.record_issue(
                            &alloc,
                            data_start(&alloc),
                            Some(entry.nominal_arrival),
                            frame_index,
                        );
                        allocations.push(alloc);
                        carry.push(PendingEntry {
                            bytes: remaining,
                            ..entry
                        });
                    }
                    Placement::None => carry.push(entry),
                }
            }
            // Leftovers keep their place ahead of later announcements.
            carry.append(&mut self.pending);
            self.pending = carry;
        }

        let poll_frames = cfg.poll_frames();
        let demands: Vec<SrDemand> = self
            .tconts
            .iter()
            .map(|(&id, s)| SrDemand {
                tcont_id: id,
                request_bytes: self.sr_request(id),
                poll_due: s
                    .last_alloc_frame
                    .is_none_or(|f| frame_index.saturating_sub(f) >= poll_frames),
            })
            .collect();
        for a in sr_fill(&cfg, &mut gaps, &demands) {
            let t = fs + cfg.bytes_to_time(a.data_offset(&cfg) as u64);
            self.record_issue(&a, t, None, frame_index);
            allocations.push(a);
        }

        allocations.sort_by_key(|a| a.start_offset);
        let map = BwMap {
            frame_index,
            allocations,
        };
        self.maps.insert(frame_index, map.clone());
        map
    }

    fn record_issue(
        &mut self,
        a: &super::Allocation,
        data_start: SimTime,
        covers_arrival: Option<SimTime>,
        frame_index: u64,
    ) {
        let Some(state) = self.tconts.get_mut(&a.tcont_id) else {
            return;
        };
        state.last_alloc_frame = Some(frame_index);
        if a.kind == AllocKind::Data {
            let at = state.issued.partition_point(|i| i.data_start <= data_start);
            state.issued.insert(
                at,
                Issued {
                    data_start,
                    bytes: a.grant_bytes as u64,
                    covers_arrival,
                },
            );
        }
    }

    /// Plays out the stored map for `frame_index` (an empty frame if none was
    /// computed) and returns its samples and byte counts.
    pub fn execute_frame(&mut self, frame_index: u64) -> Result<FrameOutcome, PonError> {
        let map = self
            .maps
            .remove(&frame_index)
            .unwrap_or_else(|| BwMap::new(frame_index));
        self.execute_map(&map)
    }

    /// Executes an explicit map against the current queues.
    pub fn execute_map(&mut self, map: &BwMap) -> Result<FrameOutcome, PonError> {
        let cfg = &self.cfg;
        let violations = validate_bwmap(map, cfg);
        if cfg.strict && !violations.is_empty() {
            return Err(PonError::InvalidMap {
                frame: map.frame_index,
                violations,
            });
        }
        let fs = cfg.frame_start(map.frame_index);
        let hdr = cfg.xgem_header_bytes;
        let mut out = FrameOutcome {
            frame_index: map.frame_index,
            frame_start: fs,
            violations,
            ..FrameOutcome::default()
        };

        for a in &map.allocations {
            out.allocations += 1;
            out.granted_bytes += a.grant_bytes as u64;
            let Some(state) = self.tconts.get_mut(&a.tcont_id) else {
                out.unknown_tcont += 1;
                continue;
            };
            let t0 = fs + cfg.bytes_to_time(a.data_offset(cfg) as u64);
            let mut wire: u32 = 0;
            if a.kind == AllocKind::Data {
                loop {
                    let room = a.grant_bytes - wire;
                    let Some(head) = state.queue.head() else { break };
                    if head.enqueue_time > t0 || room == 0 {
                        break;
                    }
                    let left = head.remaining();
                    let (payload, cost) = if head.sent_bytes == 0 && left <= room {
                        (left, left)
                    } else if room > hdr {
                        let p = left.min(room - hdr);
                        (p, p + hdr)
                    } else {
                        break;
                    };
                    state.queue.mark_first_grant(t0);
                    wire += cost;
                    if let Some(done) = state.queue.send_from_head(payload) {
                        let rx = t0 + cfg.bytes_to_time(wire as u64) + state.propagation;
                        out.samples.push(LatencySample {
                            packet_id: done.packet.packet_id,
                            tcont_id: a.tcont_id,
                            class: state.queue.class,
                            bytes: done.packet.bytes,
                            enqueue_time: done.enqueue_time,
                            grant_start_time: done.first_grant_start.unwrap_or(t0),
                            olt_rx_time: rx,
                        });
                    }
                }
                out.used_bytes += wire as u64;
            } else {
                out.used_bytes += a.grant_bytes as u64;
            }
            let taken_at = t0 + cfg.bytes_to_time(a.grant_bytes as u64);
            self.inflight.push(StatusReport {
                tcont_id: a.tcont_id,
                requirement: state.queue.requirement_at(taken_at, hdr),
                taken_at,
                rx_at: taken_at + state.propagation,
            });
        }
        out.wasted_bytes = out.granted_bytes - out.used_bytes;
        Ok(out)
    }

    /// Offered bytes (accepted plus dropped) per TCONT minus what was sent,
    /// queued and dropped. All zeros when bytes are conserved.
    pub fn conservation_residuals(&self) -> BTreeMap<TcontId, i128> {
        self.tconts
            .iter()
            .map(|(&id, s)| {
                let q = &s.queue;
                let offered = (q.enqueued_bytes + q.dropped_bytes) as i128;
                let accounted =
                    (q.delivered_bytes + q.status_report() + q.dropped_bytes) as i128;
                (id, offered - accounted)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cti::{CtiEntry, VERSION};
    use crate::pon::{propagation_for_km, Allocation};

    fn pkt(id: u64, bytes: u32) -> FronthaulPacket {
        FronthaulPacket {
            packet_id: id,
            bytes,
            created_at: SimTime::ZERO,
            grant: None,
        }
    }

    fn olt(cfg: PonConfig, mode: DbaMode) -> Olt {
        Olt::new(
            cfg,
            &CtiConfig::default(),
            &[OnuLink {
                onu_id: 0,
                propagation: propagation_for_km(10.0),
            }],
            &[
                TcontSpec {
                    tcont_id: 1,
                    onu_id: 0,
                    class: TrafficClass::Fronthaul,
                },
                TcontSpec {
                    tcont_id: 2,
                    onu_id: 0,
                    class: TrafficClass::Background,
                },
            ],
            mode,
        )
        .unwrap()
    }

    fn one_alloc(frame: u64, tcont: TcontId, start: u32, grant: u32) -> BwMap {
        BwMap {
            frame_index: frame,
            allocations: vec![Allocation {
                tcont_id: tcont,
                start_offset: start,
                grant_bytes: grant,
                kind: AllocKind::Data,
            }],
        }
    }

    fn zero_overhead() -> PonConfig {
        PonConfig {
            burst_overhead_bytes: 0,
            guard_bytes: 0,
            xgem_header_bytes: 0,
            ..PonConfig::default()
        }
    }

    #[test]
    fn exact_grant_empties_the_queue() {
        let mut o = olt(PonConfig::default(), DbaMode::Sr);
        o.enqueue(1, pkt(7, 3_780), SimTime::ZERO).unwrap();
        let r = o.execute_map(&one_alloc(0, 1, 0, 3_780)).unwrap();
        assert_eq!(r.samples.len(), 1);
        assert_eq!(r.wasted_bytes, 0);
        assert!(o.queue(1).unwrap().is_empty());
    }

    #[test]
    fn oversized_grant_wastes_the_difference() {
        let mut o = olt(zero_overhead(), DbaMode::Sr);
        o.enqueue(1, pkt(7, 3_780), SimTime::ZERO).unwrap();
        let r = o.execute_map(&one_alloc(0, 1, 0, 4_000)).unwrap();
        assert_eq!(r.wasted_bytes, 220);
    }

    #[test]
    fn zero_wait_total_delay_is_serialization_plus_fiber() {
        let mut o = olt(zero_overhead(), DbaMode::Sr);
        o.enqueue(1, pkt(7, 3_780), SimTime::ZERO).unwrap();
        let r = o.execute_map(&one_alloc(0, 1, 0, 3_780)).unwrap();
        let s = r.samples[0];
        assert_eq!(s.queue_delay(), SimTime::ZERO);
        // 3,780 * 8 / 9.95328e9 s = 3.038 us, plus 50 us of fiber.
        let total = s.total_delay().as_micros_f64();
        assert!((total - 53.04).abs() < 0.005, "{total}");
    }

    #[test]
    fn fragments_complete_in_later_grants() {
        let cfg = PonConfig::default();
        let mut o = olt(cfg.clone(), DbaMode::Sr);
        o.enqueue(1, pkt(7, 3_780), SimTime::ZERO).unwrap();
        let a = o.execute_map(&one_alloc(0, 1, 0, 1_008)).unwrap();
        assert!(a.samples.is_empty());
        assert_eq!(a.used_bytes, 1_008);
        assert_eq!(o.queue(1).unwrap().status_report(), 2_780);
        let b = o.execute_map(&one_alloc(1, 1, 0, 2_788)).unwrap();
        assert_eq!(b.samples.len(), 1);
        assert_eq!(b.wasted_bytes, 0);
        // Queue delay runs to the first fragment's grant.
        let s = b.samples[0];
        assert_eq!(s.grant_start_time, cfg.bytes_to_time(40));
    }

    #[test]
    fn packets_arriving_after_data_start_wait() {
        let mut o = olt(PonConfig::default(), DbaMode::Sr);
        o.enqueue(1, pkt(7, 100), SimTime::from_micros(1)).unwrap();
        let r = o.execute_map(&one_alloc(0, 1, 0, 100)).unwrap();
        assert!(r.samples.is_empty());
        assert_eq!(r.wasted_bytes, 100);
    }

    #[test]
    fn unknown_tcont_is_counted() {
        let mut o = olt(PonConfig::default(), DbaMode::Sr);
        let r = o.execute_map(&one_alloc(0, 99, 0, 100)).unwrap();
        assert_eq!(r.unknown_tcont, 1);
    }

    #[test]
    fn strict_mode_rejects_invalid_maps() {
        let mut o = olt(PonConfig::default(), DbaMode::Sr);
        assert!(matches!(
            o.execute_map(&one_alloc(0, 1, 0, 3)),
            Err(PonError::InvalidMap { .. })
        ));
    }

    #[test]
    fn idle_olt_polls_every_tcont() {
        let mut o = olt(PonConfig::default(), DbaMode::Sr);
        let m = o.compute_map(1, SimTime::ZERO);
        assert_eq!(m.allocations.len(), 2);
        assert!(m.allocations.iter().all(|a| a.kind == AllocKind::Poll));
        // Not due again until four frames later.
        assert!(o.compute_map(2, SimTime::from_micros(125)).allocations.is_empty());
        assert_eq!(o.compute_map(5, SimTime::from_micros(500)).allocations.len(), 2);
    }

    #[test]
    fn reported_backlog_is_granted_once() {
        let cfg = PonConfig::default();
        let mut o = olt(cfg.clone(), DbaMode::Sr);
        let f = cfg.frame_duration;
        o.compute_map(1, SimTime::ZERO);
        o.enqueue(1, pkt(1, 3_780), SimTime::from_micros(10)).unwrap();
        o.execute_frame(0).unwrap();
        o.compute_map(2, f);
        o.execute_frame(1).unwrap();
        // The poll in frame 1 reported 3,780 bytes; frame 3's map grants it.
        let m = o.compute_map(3, f * 2);
        let data: Vec<&Allocation> = m
            .allocations
            .iter()
            .filter(|a| a.kind == AllocKind::Data)
            .collect();
        assert_eq!(data.len(), 1);
        assert_eq!(data[0].grant_bytes, 3_780);
        o.execute_frame(2).unwrap();
        let m = o.compute_map(4, f * 3);
        assert!(m.allocations.iter().all(|a| a.kind == AllocKind::Poll));
        let r = o.execute_frame(3).unwrap();
        assert_eq!(r.samples.len(), 1);
    }

    fn report(tcont: TcontId, bytes: u32, start: SimTime, end: SimTime) -> CtiReport {
        CtiReport {
            version: VERSION,
            seq: 0,
            report_time: SimTime::ZERO,
            entries: vec![CtiEntry {
                tcont_id: tcont,
                expected_bytes: bytes,
                arrival_start: start,
                arrival_end: end,
            }],
        }
    }

    #[test]
    fn announced_burst_is_granted_after_its_window() {
        let cfg = PonConfig::default();
        let mut o = olt(cfg.clone(), DbaMode::Cti);
        let start = SimTime::from_micros(1_040);
        let end = SimTime::from_micros(1_060);
        o.on_cti_report(&report(1, 3_780, start, end), SimTime::from_micros(20));
        // 1,060 us falls in frame 8.
        let m = o.compute_map(8, cfg.frame_start(7));
        let a = m
            .allocations
            .iter()
            .find(|a| a.tcont_id == 1 && a.kind == AllocKind::Data)
            .unwrap();
        assert_eq!(a.grant_bytes, 3_780);
        let data_start = cfg.frame_start(8) + cfg.bytes_to_time(a.data_offset(&cfg) as u64);
        assert!(data_start >= end);
        assert_eq!(o.pending_entries(), 0);
    }

    #[test]
    fn overflowing_announcements_carry_over_in_order() {
        let cfg = PonConfig::default();
        let mut o = olt(cfg.clone(), DbaMode::Cti);
        let t = SimTime::ZERO;
        o.on_cti_report(&report(1, 100_000, t, t), t);
        o.on_cti_report(&report(2, 100_000, t, t), t);
        let m0 = o.compute_map(3, t);
        let first: Vec<(TcontId, u32)> = m0
            .allocations
            .iter()
            .filter(|a| a.kind == AllocKind::Data)
            .map(|a| (a.tcont_id, a.grant_bytes))
            .collect();
        assert_eq!(first[0], (1, 100_000));
        assert_eq!(first[1].0, 2);
        let m1 = o.compute_map(4, t);
        let second = m1
            .allocations
            .iter()
            .find(|a| a.tcont_id == 2 && a.kind == AllocKind::Data)
            .unwrap();
        // The split costs one header on each side of the cut.
        assert_eq!(first[1].1 + second.grant_bytes, 100_000 + 16);
        assert_eq!(o.pending_entries(), 0);
    }

    #[test]
    fn baseline_ignores_reports_and_mode_switch_clears_pending() {
        let mut o = olt(PonConfig::default(), DbaMode::Sr);
        let t = SimTime::ZERO;
        o.on_cti_report(&report(1, 100, t, t), t);
        assert_eq!(o.pending_entries(), 0);
        o.set_mode(DbaMode::Cti);
        o.on_cti_report(&report(1, 100, t, t), t);
        assert_eq!(o.pending_entries(), 1);
        o.set_mode(DbaMode::Sr);
        assert_eq!(o.pending_entries(), 0);
    }

    #[test]
    fn duplicate_and_dangling_tconts_are_rejected() {
        let link = OnuLink {
            onu_id: 0,
            propagation: SimTime::ZERO,
        };
        let t = |id, onu| TcontSpec {
            tcont_id: id,
            onu_id: onu,
            class: TrafficClass::Background,
        };
        let cti = CtiConfig::default();
        let cfg = PonConfig::default();
        assert_eq!(
            Olt::new(cfg.clone(), &cti, &[link], &[t(1, 0), t(1, 0)], DbaMode::Sr).unwrap_err(),
            PonError::DuplicateTcont(1)
        );
        assert_eq!(
            Olt::new(cfg, &cti, &[link], &[t(1, 3)], DbaMode::Sr).unwrap_err(),
            PonError::UnknownOnu { tcont: 1, onu: 3 }
        );
    }
}
