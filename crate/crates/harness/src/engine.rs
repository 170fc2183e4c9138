//! One simulation run: the DU slot loop, the CTI channel and the OLT frame
//! loop, all driven by the discrete-event queue.

use std::collections::BTreeMap;

use ctipon::cti::{self, CtiError, CtiReceiver, CtiReport, CtiSender, ReportContext};
use ctipon::pon::{
    propagation_for_km, write_bwmap_trace, BwMap, DbaMode, EnqueueOutcome, LatencySample, Olt,
    OnuLink, PonError, TcontId, TcontSpec, TrafficClass, Violation, BWMAP_TRACE_HEADER,
};
use ctipon::ran::{
    arrival_time, fronthaul_bytes_for_grant, gen_traffic, FronthaulPacket, GrantRef, RanError,
    RoundRobinScheduler, TrafficSource, UeId, UeState, UplinkGrant,
};
use ctipon::sim::{ComponentId, RngStream, SimTime, Simulator};
use ctipon::telemetry::{MetricWindow, RunMeta, RunReport, Telemetry, TelemetryConfig};
use serde::Serialize;
use thiserror::Error;

use crate::scenario::ScenarioConfig;

/// Largest background packet; bigger per-frame volumes are split.
pub const BACKGROUND_MTU: u64 = 1_500;

const DU: ComponentId = ComponentId(0);
const OLT: ComponentId = ComponentId(1);
const ONU: ComponentId = ComponentId(2);

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid setup: {0}")]
    Setup(String),
    #[error("bandwidth map for frame {frame} failed validation: {violations:?}")]
    InvalidMap {
        frame: u64,
        violations: Vec<Violation>,
    },
    #[error(transparent)]
    Ran(#[from] RanError),
    #[error(transparent)]
    Cti(#[from] CtiError),
    #[error("CTI report failed to encode: {0}")]
    Encode(#[from] cti::EncodeError),
    #[error("CTI report failed to decode: {0}")]
    Decode(#[from] cti::DecodeError),
    #[error(transparent)]
    Pon(PonError),
}

impl EngineError {
    /// True for failures of the model at run time, as opposed to setup.
    pub fn is_runtime_violation(&self) -> bool {
        matches!(self, EngineError::InvalidMap { .. })
    }
}

impl From<PonError> for EngineError {
    fn from(e: PonError) -> Self {
        match e {
            PonError::InvalidMap { frame, violations } => {
                EngineError::InvalidMap { frame, violations }
            }
            other => EngineError::Pon(other),
        }
    }
}

#[derive(Debug, Clone)]
enum Ev {
    Slot(u64),
    Frame(u64),
    FronthaulArrival { tcont: TcontId, packet: FronthaulPacket },
    BackgroundArrival { tcont: TcontId, packet: FronthaulPacket },
    CtiDelivery(Vec<u8>),
}

/// Optional recording, off for plain batch runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct EngineOptions {
    /// Keep every computed bandwidth map.
    pub record_maps: bool,
    /// Render maps into the text trace format as they are computed.
    pub bwmap_trace: bool,
    /// Keep every latency sample, both classes.
    pub keep_samples: bool,
    /// Keep CTI reports for the live log until drained.
    pub cti_log: bool,
}

/// A CTI report as the DU sent it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CtiLogEntry {
    pub sent_at: SimTime,
    pub dropped: bool,
    pub report: CtiReport,
    pub wire: Vec<u8>,
}

/// Internal counters for checks that the exported report does not carry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub trace_digest: String,
    pub events_delivered: u64,
    /// Per-TCONT byte conservation residual; all zero when bytes balance.
    pub conservation: BTreeMap<TcontId, i128>,
    /// Samples produced by the PON model.
    pub samples_emitted: u64,
    /// Samples the telemetry path accounted for.
    pub samples_recorded: u64,
    pub frames_executed: u64,
    pub invalid_frames: u64,
    pub cti_sent: u64,
    pub cti_dropped: u64,
    pub cti_received: u64,
    pub cti_seq_gaps: u64,
    pub cti_entries_accepted: u64,
    pub lag_frames: u64,
}

/// Everything a finished batch run hands back.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub diagnostics: Diagnostics,
    pub maps: Vec<BwMap>,
    pub bwmap_trace: Option<String>,
    pub samples: Vec<LatencySample>,
}

struct Background {
    tcont: TcontId,
    source: TrafficSource,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    initial_mode: DbaMode,
    opts: EngineOptions,
    sim: Simulator<Ev>,
    olt: Olt,
    ues: Vec<UeState>,
    ue_tcont: BTreeMap<UeId, TcontId>,
    scheduler: RoundRobinScheduler,
    sender: CtiSender,
    receiver: CtiReceiver,
    drop_rng: RngStream,
    background: Vec<Background>,
    telemetry: Telemetry,
    in_flight: BTreeMap<u64, Vec<UplinkGrant>>,
    pending_mode: Option<DbaMode>,
    pending_scales: Vec<(Option<UeId>, f64)>,
    next_packet_id: u64,
    next_slot: u64,
    next_frame: u64,
    samples_emitted: u64,
    frames_executed: u64,
    invalid_frames: u64,
    cti_dropped: u64,
    maps: Vec<BwMap>,
    trace: Option<String>,
    samples: Vec<LatencySample>,
    cti_log: Vec<CtiLogEntry>,
    error: Option<String>,
}

impl Simulation {
    pub fn new(
        cfg: &ScenarioConfig,
        mode: DbaMode,
        opts: EngineOptions,
    ) -> Result<Self, EngineError> {
        let errors = cfg.validate();
        if !errors.is_empty() {
            return Err(EngineError::Setup(errors.join("; ")));
        }
        let links: Vec<OnuLink> = cfg
            .onus
            .iter()
            .map(|o| OnuLink {
                onu_id: o.onu_id,
                propagation: propagation_for_km(o.fiber_km),
            })
            .collect();
        let mut tconts = Vec::new();
        let mut background = Vec::new();
        for o in &cfg.onus {
            tconts.push(TcontSpec {
                tcont_id: o.fronthaul_tcont,
                onu_id: o.onu_id,
                class: TrafficClass::Fronthaul,
            });
            if let Some(t) = o.background_tcont {
                tconts.push(TcontSpec {
                    tcont_id: t,
                    onu_id: o.onu_id,
                    class: TrafficClass::Background,
                });
                if let Some(p) = &o.background {
                    background.push(Background {
                        tcont: t,
                        source: TrafficSource::new(
                            p.clone(),
                            RngStream::new(cfg.seed, format!("bg/{}", o.onu_id)),
                        ),
                    });
                }
            }
        }
        let olt = Olt::new(cfg.pon.clone(), &cfg.cti, &links, &tconts, mode)
            .map_err(|e| EngineError::Setup(e.to_string()))?;
        let mut ues: Vec<UeState> = cfg
            .ues
            .iter()
            .map(|u| {
                let rng = RngStream::new(cfg.seed, format!("ue/{}", u.ue_id));
                UeState::new(u.ue_id, u.mcs, TrafficSource::new(u.traffic.clone(), rng))
            })
            .collect();
        ues.sort_by_key(|u| u.ue_id);
        let telemetry = Telemetry::new(
            TelemetryConfig::new(cfg.telemetry.window, cfg.pon.frame_capacity_bytes() as u64),
            cfg.seed,
        );

        let mut sim = Simulator::new();
        sim.schedule(SimTime::ZERO, DU, Ev::Slot(0))
            .expect("time zero is never in the past");
        sim.schedule(SimTime::ZERO, OLT, Ev::Frame(0))
            .expect("time zero is never in the past");

        Ok(Simulation {
            cfg: cfg.clone(),
            initial_mode: mode,
            opts,
            sim,
            olt,
            ues,
            ue_tcont: cfg.ue_tcont_map(),
            scheduler: RoundRobinScheduler::new(),
            sender: CtiSender::new(cfg.cti.heartbeat),
            receiver: CtiReceiver::default(),
            drop_rng: RngStream::new(cfg.seed, "cti-drop"),
            background,
            telemetry,
            in_flight: BTreeMap::new(),
            pending_mode: None,
            pending_scales: Vec::new(),
            next_packet_id: 0,
            next_slot: 0,
            next_frame: 0,
            samples_emitted: 0,
            frames_executed: 0,
            invalid_frames: 0,
            cti_dropped: 0,
            maps: Vec::new(),
            trace: opts.bwmap_trace.then(|| format!("{BWMAP_TRACE_HEADER}\n")),
            samples: Vec::new(),
            cti_log: Vec::new(),
            error: None,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn now(&self) -> SimTime {
        self.sim.now()
    }

    pub fn duration(&self) -> SimTime {
        self.cfg.duration
    }

    pub fn mode(&self) -> DbaMode {
        self.olt.mode()
    }

    pub fn is_complete(&self) -> bool {
        self.sim.now() >= self.cfg.duration
    }

    fn slot_at(&self, n: u64) -> SimTime {
        self.cfg.slot.slot_start(n)
    }

    fn frame_at(&self, k: u64) -> SimTime {
        self.cfg.pon.frame_start(k)
    }

    fn slot_in_run(&self, n: u64) -> bool {
        self.slot_at(n) < self.cfg.duration
    }

    fn frame_in_run(&self, k: u64) -> bool {
        self.frame_at(k) <= self.cfg.duration
    }

    /// Next slot boundary that has not been processed yet.
    pub fn next_slot_at(&self) -> Option<SimTime> {
        self.slot_in_run(self.next_slot)
            .then(|| self.slot_at(self.next_slot))
    }

    /// Next frame boundary that has not been processed yet.
    pub fn next_frame_at(&self) -> Option<SimTime> {
        self.frame_in_run(self.next_frame)
            .then(|| self.frame_at(self.next_frame))
    }

    /// Queues a mode change for the next frame boundary and returns that
    /// boundary, or `None` if the run has none left.
    pub fn request_mode(&mut self, mode: DbaMode) -> Option<SimTime> {
        let at = self.next_frame_at()?;
        self.pending_mode = Some(mode);
        Some(at)
    }

    /// Queues a traffic scale change (one UE or all) for the next slot
    /// boundary and returns that boundary.
    pub fn request_scale(&mut self, ue: Option<UeId>, scale: f64) -> Option<SimTime> {
        let at = self.next_slot_at()?;
        self.pending_scales.push((ue, scale));
        Some(at)
    }

    pub fn has_ue(&self, ue: UeId) -> bool {
        self.ue_tcont.contains_key(&ue)
    }

    /// Processes every event up to `t` (capped at the run duration).
    pub fn advance_to(&mut self, t: SimTime) -> Result<(), EngineError> {
        if let Some(e) = &self.error {
            return Err(EngineError::Setup(format!("simulation halted: {e}")));
        }
        let t = t.min(self.cfg.duration);
        if t < self.sim.now() {
            return Ok(());
        }
        while let Some(ev) = self.sim.pop_until(t) {
            if let Err(e) = self.handle(ev.payload) {
                self.error = Some(e.to_string());
                return Err(e);
            }
        }
        self.sim
            .advance_to(t)
            .expect("target is not behind the clock");
        Ok(())
    }

    fn handle(&mut self, ev: Ev) -> Result<(), EngineError> {
        let now = self.sim.now();
        match ev {
            Ev::Slot(n) => self.on_slot(n, now),
            Ev::Frame(k) => self.on_frame(k, now),
            Ev::FronthaulArrival { tcont, packet } | Ev::BackgroundArrival { tcont, packet } => {
                if self.olt.enqueue(tcont, packet, now)? == EnqueueOutcome::Dropped {
                    self.telemetry.record_drop(now);
                }
                Ok(())
            }
            Ev::CtiDelivery(wire) => {
                let report = cti::decode(&wire)?;
                self.receiver.observe(&report);
                self.olt.on_cti_report(&report, now);
                Ok(())
            }
        }
    }

    fn on_slot(&mut self, n: u64, now: SimTime) -> Result<(), EngineError> {
        self.next_slot = n + 1;
        if let Some(done) = self.in_flight.remove(&n) {
            for g in done {
                if let Some(ue) = self.ues.iter_mut().find(|u| u.ue_id == g.ue_id) {
                    ue.complete_grant(&g);
                }
            }
        }
        for (target, scale) in std::mem::take(&mut self.pending_scales) {
            for ue in &mut self.ues {
                if target.is_none_or(|id| id == ue.ue_id) {
                    ue.source.set_scale(scale);
                }
            }
        }
        for ue in &mut self.ues {
            gen_traffic(ue, n, &self.cfg.slot);
        }
        let grants = self
            .scheduler
            .schedule_slot(n, &mut self.ues, &self.cfg.slot)?;
        for g in &grants {
            let bytes = fronthaul_bytes_for_grant(g, &self.cfg.iq);
            if bytes > 0 {
                let at = arrival_time(g, &self.cfg.slot)?;
                let packet = FronthaulPacket {
                    packet_id: self.take_packet_id(),
                    bytes,
                    created_at: at,
                    grant: Some(GrantRef {
                        ue_id: g.ue_id,
                        grant_slot: g.grant_slot,
                    }),
                };
                let tcont = self.ue_tcont[&g.ue_id];
                self.sim
                    .schedule(at, ONU, Ev::FronthaulArrival { tcont, packet })
                    .map_err(|e| EngineError::Setup(e.to_string()))?;
            }
            self.in_flight.entry(g.tx_slot).or_default().push(*g);
        }
        if self.olt.mode() == DbaMode::Cti {
            self.send_report(&grants, n, now)?;
        }
        if self.slot_in_run(n + 1) {
            self.sim
                .schedule(self.slot_at(n + 1), DU, Ev::Slot(n + 1))
                .expect("slots move forward");
        }
        Ok(())
    }

    fn send_report(
        &mut self,
        grants: &[UplinkGrant],
        n: u64,
        now: SimTime,
    ) -> Result<(), EngineError> {
        let ctx = ReportContext {
            slot: &self.cfg.slot,
            iq: &self.cfg.iq,
            jitter_margin: self.cfg.cti.jitter_margin,
            clock_offset_ns: self.cfg.cti.clock_offset_ns,
        };
        let Some(report) = self.sender.build_report(grants, n, &ctx, &self.ue_tcont)? else {
            return Ok(());
        };
        let wire = cti::encode(&report)?;
        self.telemetry.record_cti_sent(now);
        let dropped = self.drop_rng.unit() < self.cfg.cti.drop_probability;
        if dropped {
            self.cti_dropped += 1;
            self.telemetry.record_cti_lost(now);
        } else {
            self.sim.schedule_in(
                self.cfg.cti.transport_delay,
                OLT,
                Ev::CtiDelivery(wire.clone()),
            );
        }
        if self.opts.cti_log {
            self.cti_log.push(CtiLogEntry {
                sent_at: now,
                dropped,
                report,
                wire,
            });
        }
        Ok(())
    }

    fn on_frame(&mut self, k: u64, now: SimTime) -> Result<(), EngineError> {
        self.next_frame = k + 1;
        let prev_mode = self.olt.mode();
        if let Some(m) = self.pending_mode.take() {
            self.olt.set_mode(m);
        }
        if k > 0 {
            let outcome = self.olt.execute_frame(k - 1)?;
            self.frames_executed += 1;
            if !outcome.violations.is_empty() {
                self.invalid_frames += 1;
            }
            self.samples_emitted += outcome.samples.len() as u64;
            if self.opts.keep_samples {
                self.samples.extend(outcome.samples.iter().copied());
            }
            self.telemetry.record_frame(&outcome, prev_mode);
        }
        if !self.frame_in_run(k + 1) {
            return Ok(());
        }

        let frame = self.cfg.pon.frame_duration;
        for b in 0..self.background.len() {
            let bytes = self.background[b].source.generate(now, frame);
            let tcont = self.background[b].tcont;
            let count = bytes.div_ceil(BACKGROUND_MTU);
            for i in 0..count {
                let size = if i + 1 == count {
                    bytes - BACKGROUND_MTU * (count - 1)
                } else {
                    BACKGROUND_MTU
                };
                let at = now + SimTime::from_nanos(frame.as_nanos() * i / count);
                let packet = FronthaulPacket {
                    packet_id: self.take_packet_id(),
                    bytes: size as u32,
                    created_at: at,
                    grant: None,
                };
                self.sim
                    .schedule(at, ONU, Ev::BackgroundArrival { tcont, packet })
                    .expect("background arrivals are not in the past");
            }
        }

        let target = k + self.olt.lag_frames();
        let map = self.olt.compute_map(target, now);
        if let Some(trace) = self.trace.as_mut() {
            write_bwmap_trace(trace, &map);
        }
        if self.opts.record_maps {
            self.maps.push(map);
        }
        self.sim
            .schedule(self.frame_at(k + 1), OLT, Ev::Frame(k + 1))
            .expect("frames move forward");
        Ok(())
    }

    fn take_packet_id(&mut self) -> u64 {
        let id = self.next_packet_id;
        self.next_packet_id += 1;
        id
    }

    /// Current metrics window.
    pub fn snapshot(&self) -> MetricWindow {
        let now = self.sim.now();
        // At the very end the clock sits on the boundary of a window that has
        // no frames; show the last one that does.
        let t = if self.is_complete() && now > SimTime::ZERO {
            now - SimTime::from_nanos(1)
        } else {
            now
        };
        self.telemetry.snapshot(t)
    }

    pub fn drain_cti_log(&mut self) -> Vec<CtiLogEntry> {
        std::mem::take(&mut self.cti_log)
    }

    pub fn report(&self) -> RunReport {
        self.telemetry.finish(&RunMeta {
            scenario_id: self.cfg.name.clone(),
            scenario_hash: self.cfg.hash(),
            mode: self.initial_mode,
            seed: self.cfg.seed,
            duration: self.cfg.duration,
        })
    }

    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            trace_digest: hex::encode(self.sim.trace_digest()),
            events_delivered: self.sim.counters().delivered,
            conservation: self.olt.conservation_residuals(),
            samples_emitted: self.samples_emitted,
            samples_recorded: self.telemetry.total_samples(),
            frames_executed: self.frames_executed,
            invalid_frames: self.invalid_frames,
            cti_sent: self.sender.emitted(),
            cti_dropped: self.cti_dropped,
            cti_received: self.receiver.received(),
            cti_seq_gaps: self.receiver.gaps(),
            cti_entries_accepted: self.olt.cti_entries_accepted(),
            lag_frames: self.olt.lag_frames(),
        }
    }

    /// Runs to the end and returns the report plus whatever was recorded.
    pub fn run(mut self) -> Result<RunOutput, EngineError> {
        self.advance_to(self.cfg.duration)?;
        Ok(RunOutput {
            report: self.report(),
            diagnostics: self.diagnostics(),
            maps: std::mem::take(&mut self.maps),
            bwmap_trace: self.trace.take(),
            samples: std::mem::take(&mut self.samples),
        })
    }
}

/// Batch run of `cfg` in `mode`.
pub fn run_scenario(cfg: &ScenarioConfig, mode: DbaMode) -> Result<RunReport, EngineError> {
    Ok(Simulation::new(cfg, mode, EngineOptions::default())?.run()?.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ctipon::ran::UeTrafficProfile;

    fn short(mut cfg: ScenarioConfig) -> ScenarioConfig {
        cfg.duration = SimTime::from_millis(50);
        cfg
    }

    #[test]
    fn boundaries_track_the_clock() {
        let cfg = short(ScenarioConfig::default());
        let mut s = Simulation::new(&cfg, DbaMode::Cti, EngineOptions::default()).unwrap();
        assert_eq!(s.next_frame_at(), Some(SimTime::ZERO));
        assert_eq!(s.next_slot_at(), Some(SimTime::ZERO));
        s.advance_to(SimTime::ZERO).unwrap();
        assert_eq!(s.next_frame_at(), Some(SimTime::from_micros(125)));
        assert_eq!(s.next_slot_at(), Some(SimTime::from_millis(1)));
        s.advance_to(SimTime::from_micros(300)).unwrap();
        assert_eq!(s.next_frame_at(), Some(SimTime::from_micros(375)));
        s.advance_to(SimTime::from_millis(50)).unwrap();
        assert!(s.is_complete());
        assert_eq!(s.next_frame_at(), None);
        assert_eq!(s.next_slot_at(), None);
    }

    #[test]
    fn frames_cover_the_run() {
        let cfg = short(ScenarioConfig::default());
        let out = Simulation::new(&cfg, DbaMode::Sr, EngineOptions::default())
            .unwrap()
            .run()
            .unwrap();
        assert_eq!(out.diagnostics.frames_executed, 400);
        assert_eq!(out.report.aggregates.frames, 400);
    }

    #[test]
    fn chunked_advance_matches_single_run() {
        let cfg = short(ScenarioConfig::default());
        let whole = run_scenario(&cfg, DbaMode::Cti).unwrap();
        let mut s = Simulation::new(&cfg, DbaMode::Cti, EngineOptions::default()).unwrap();
        let mut t = SimTime::ZERO;
        while !s.is_complete() {
            t += SimTime::from_nanos(333_333);
            s.advance_to(t).unwrap();
        }
        assert_eq!(s.report(), whole);
    }

    #[test]
    fn mode_change_waits_for_the_frame_boundary() {
        let cfg = short(ScenarioConfig::default());
        let mut s = Simulation::new(&cfg, DbaMode::Cti, EngineOptions::default()).unwrap();
        s.advance_to(SimTime::from_micros(1_010)).unwrap();
        let at = s.request_mode(DbaMode::Sr).unwrap();
        assert_eq!(at, SimTime::from_micros(1_125));
        s.advance_to(SimTime::from_micros(1_124)).unwrap();
        assert_eq!(s.mode(), DbaMode::Cti);
        s.advance_to(at).unwrap();
        assert_eq!(s.mode(), DbaMode::Sr);
    }

    #[test]
    fn scale_zero_stops_new_grants() {
        let mut cfg = short(ScenarioConfig::default());
        cfg.ues[0].traffic = UeTrafficProfile::constant(8e6);
        cfg.telemetry.window = SimTime::from_millis(10);
        let mut s = Simulation::new(&cfg, DbaMode::Cti, EngineOptions::default()).unwrap();
        s.advance_to(SimTime::from_millis(10)).unwrap();
        let at = s.request_scale(None, 0.0).unwrap();
        assert_eq!(at, SimTime::from_millis(11));
        s.advance_to(SimTime::from_millis(50)).unwrap();
        let d = s.diagnostics();
        // Anything generated before the change has drained by the end.
        assert_eq!(d.samples_emitted, d.samples_recorded);
        let windows = s.report().windows;
        assert!(windows[0].samples > 0);
        // The last grant (slot 10) reaches the ONU around 15 ms.
        assert!(windows.iter().skip(2).all(|w| w.samples == 0));
    }
}
