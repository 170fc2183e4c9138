//! Windowed latency and capacity metrics, run reports and their exports.

mod export;
mod histogram;
mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::pon::{DbaMode, FrameOutcome, LatencySample, TrafficClass};
use crate::sim::{RngStream, SimTime};

pub use export::{to_csv, to_json_lines, WindowRow, CSV_HEADER};
pub use histogram::{bin_edges, Histogram, BINS_PER_DECADE, HIST_MAX_NS, HIST_MIN_NS, REGULAR_BINS};
pub use stats::{nearest_rank, LatencyStats, Moments, Reservoir};

pub const WINDOW_RESERVOIR_CAP: usize = 65_536;
pub const RUN_RESERVOIR_CAP: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetryConfig {
    pub window: SimTime,
    pub frame_capacity_bytes: u64,
    pub window_reservoir_cap: usize,
}

impl TelemetryConfig {
    pub fn new(window: SimTime, frame_capacity_bytes: u64) -> Self {
        TelemetryConfig {
            window,
            frame_capacity_bytes,
            window_reservoir_cap: WINDOW_RESERVOIR_CAP,
        }
    }
}

/// Immutable view of one metrics window.
///
/// Latency statistics cover fronthaul packets; background packets are only
/// counted here and summarised per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricWindow {
    pub window_start_ns: u64,
    pub window_end_ns: u64,
    /// Mode in force at the first frame of the window.
    pub mode: Option<DbaMode>,
    pub samples: u64,
    pub queue_delay: LatencyStats,
    pub total_delay: LatencyStats,
    pub background_samples: u64,
    pub frames: u64,
    pub granted_bytes: u64,
    pub used_bytes: u64,
    pub wasted_bytes: u64,
    pub utilization: f64,
    pub cti_msgs: u64,
    pub cti_lost: u64,
    pub drops: u64,
}

#[derive(Debug, Clone)]
struct WindowAcc {
    mode: Option<DbaMode>,
    queue: Moments,
    total: Moments,
    reservoir: Reservoir<(u64, u64)>,
    background: u64,
    frames: u64,
    granted: u64,
    used: u64,
    wasted: u64,
    cti_msgs: u64,
    cti_lost: u64,
    drops: u64,
}

impl WindowAcc {
    fn new(cap: usize) -> Self {
        WindowAcc {
            mode: None,
            queue: Moments::default(),
            total: Moments::default(),
            reservoir: Reservoir::new(cap),
            background: 0,
            frames: 0,
            granted: 0,
            used: 0,
            wasted: 0,
            cti_msgs: 0,
            cti_lost: 0,
            drops: 0,
        }
    }

    fn view(&self, index: u64, cfg: &TelemetryConfig) -> MetricWindow {
        let mut q: Vec<u64> = self.reservoir.items().iter().map(|s| s.0).collect();
        let mut t: Vec<u64> = self.reservoir.items().iter().map(|s| s.1).collect();
        let denom = self.frames * cfg.frame_capacity_bytes;
        let start = cfg.window.as_nanos() * index;
        MetricWindow {
            window_start_ns: start,
            window_end_ns: start + cfg.window.as_nanos(),
            mode: self.mode,
            samples: self.queue.count,
            queue_delay: self.queue.stats(&mut q),
            total_delay: self.total.stats(&mut t),
            background_samples: self.background,
            frames: self.frames,
            granted_bytes: self.granted,
            used_bytes: self.used,
            wasted_bytes: self.wasted,
            utilization: if denom == 0 {
                0.0
            } else {
                self.used as f64 / denom as f64
            },
            cti_msgs: self.cti_msgs,
            cti_lost: self.cti_lost,
            drops: self.drops,
        }
    }
}

/// Whole-run aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregates {
    pub fronthaul_samples: u64,
    pub queue_delay: LatencyStats,
    pub total_delay: LatencyStats,
    pub background_samples: u64,
    pub background_queue_delay: LatencyStats,
    pub background_total_delay: LatencyStats,
    /// Smallest total delay of any packet, either class.
    pub min_total_delay_ns: Option<u64>,
    /// Size of the smallest delivered packet.
    pub min_packet_bytes: Option<u32>,
    pub frames: u64,
    pub granted_bytes: u64,
    pub used_bytes: u64,
    pub wasted_bytes: u64,
    pub utilization: f64,
    pub cti_msgs: u64,
    pub cti_lost: u64,
    pub drops: u64,
    pub invalid_frames: u64,
}

/// Everything a finished run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario_id: String,
    pub scenario_hash: String,
    pub mode: DbaMode,
    pub seed: u64,
    pub duration_ns: u64,
    pub window_ns: u64,
    pub aggregates: RunAggregates,
    pub windows: Vec<MetricWindow>,
    pub queue_delay_histogram: Histogram,
    pub total_delay_histogram: Histogram,
}

/// Identity of the run a report belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunMeta {
    pub scenario_id: String,
    pub scenario_hash: String,
    pub mode: DbaMode,
    pub seed: u64,
    pub duration: SimTime,
}

#[derive(Debug, Clone)]
pub struct Telemetry {
    cfg: TelemetryConfig,
    rng: RngStream,
    windows: BTreeMap<u64, WindowAcc>,
    fh_queue: Moments,
    fh_total: Moments,
    fh_reservoir: Reservoir<(u64, u64)>,
    bg_queue: Moments,
    bg_total: Moments,
    bg_reservoir: Reservoir<(u64, u64)>,
    min_total: Option<u64>,
    min_bytes: Option<u32>,
    q_hist: Histogram,
    t_hist: Histogram,
    frames: u64,
    granted: u64,
    used: u64,
    wasted: u64,
    cti_msgs: u64,
    cti_lost: u64,
    drops: u64,
    invalid_frames: u64,
}

impl Telemetry {
    pub fn new(cfg: TelemetryConfig, seed: u64) -> Self {
        assert!(cfg.window > SimTime::ZERO, "window must be positive");
        Telemetry {
            cfg,
            rng: RngStream::new(seed, "telemetry"),
            windows: BTreeMap::new(),
            fh_queue: Moments::default(),
            fh_total: Moments::default(),
            fh_reservoir: Reservoir::new(RUN_RESERVOIR_CAP),
            bg_queue: Moments::default(),
            bg_total: Moments::default(),
            bg_reservoir: Reservoir::new(RUN_RESERVOIR_CAP),
            min_total: None,
            min_bytes: None,
            q_hist: Histogram::default(),
            t_hist: Histogram::default(),
            frames: 0,
            granted: 0,
            used: 0,
            wasted: 0,
            cti_msgs: 0,
            cti_lost: 0,
            drops: 0,
            invalid_frames: 0,
        }
    }

    pub fn config(&self) -> &TelemetryConfig {
        &self.cfg
    }

    pub fn window_index(&self, t: SimTime) -> u64 {
        t.as_nanos() / self.cfg.window.as_nanos()
    }

    fn acc(&mut self, t: SimTime) -> &mut WindowAcc {
        let i = self.window_index(t);
        let cap = self.cfg.window_reservoir_cap;
        self.windows.entry(i).or_insert_with(|| WindowAcc::new(cap))
    }

    /// Files a sample under the window of its OLT arrival.
    pub fn record_sample(&mut self, s: &LatencySample) {
        let (q, t) = (s.queue_delay().as_nanos(), s.total_delay().as_nanos());
        self.min_total = Some(self.min_total.map_or(t, |m| m.min(t)));
        self.min_bytes = Some(self.min_bytes.map_or(s.bytes, |m| m.min(s.bytes)));
        match s.class {
            TrafficClass::Fronthaul => {
                self.fh_queue.add(q);
                self.fh_total.add(t);
                self.fh_reservoir.offer((q, t), &mut self.rng);
                self.q_hist.add(q);
                self.t_hist.add(t);
                let i = self.window_index(s.olt_rx_time);
                let cap = self.cfg.window_reservoir_cap;
                let w = self.windows.entry(i).or_insert_with(|| WindowAcc::new(cap));
                w.queue.add(q);
                w.total.add(t);
                w.reservoir.offer((q, t), &mut self.rng);
            }
            TrafficClass::Background => {
                self.bg_queue.add(q);
                self.bg_total.add(t);
                self.bg_reservoir.offer((q, t), &mut self.rng);
                self.acc(s.olt_rx_time).background += 1;
            }
        }
    }

    /// Files a frame's byte counts under the window holding its start, then
    /// each of its samples.
    pub fn record_frame(&mut self, f: &FrameOutcome, mode: DbaMode) {
        self.frames += 1;
        self.granted += f.granted_bytes;
        self.used += f.used_bytes;
        self.wasted += f.wasted_bytes;
        if !f.violations.is_empty() {
            self.invalid_frames += 1;
        }
        let w = self.acc(f.frame_start);
        w.mode.get_or_insert(mode);
        w.frames += 1;
        w.granted += f.granted_bytes;
        w.used += f.used_bytes;
        w.wasted += f.wasted_bytes;
        for s in &f.samples {
            self.record_sample(s);
        }
    }

    pub fn record_cti_sent(&mut self, at: SimTime) {
        self.cti_msgs += 1;
        self.acc(at).cti_msgs += 1;
    }

    pub fn record_cti_lost(&mut self, at: SimTime) {
        self.cti_lost += 1;
        self.acc(at).cti_lost += 1;
    }

    pub fn record_drop(&mut self, at: SimTime) {
        self.drops += 1;
        self.acc(at).drops += 1;
    }

    /// View of the window containing `t`; empty if nothing was recorded.
    pub fn snapshot(&self, t: SimTime) -> MetricWindow {
        self.window_view(self.window_index(t))
    }

    pub fn window_view(&self, index: u64) -> MetricWindow {
        match self.windows.get(&index) {
            Some(w) => w.view(index, &self.cfg),
            None => WindowAcc::new(0).view(index, &self.cfg),
        }
    }

    pub fn total_samples(&self) -> u64 {
        self.fh_queue.count + self.bg_queue.count
    }

    pub fn finish(&self, meta: &RunMeta) -> RunReport {
        let w = self.cfg.window.as_nanos();
        let mut n = meta.duration.as_nanos().div_ceil(w);
        if let Some((&last, _)) = self.windows.last_key_value() {
            n = n.max(last + 1);
        }
        let windows = (0..n).map(|i| self.window_view(i)).collect();
        let split = |r: &Reservoir<(u64, u64)>| -> (Vec<u64>, Vec<u64>) {
            r.items().iter().copied().unzip()
        };
        let (mut fq, mut ft) = split(&self.fh_reservoir);
        let (mut bq, mut bt) = split(&self.bg_reservoir);
        let denom = self.frames * self.cfg.frame_capacity_bytes;
        RunReport {
            scenario_id: meta.scenario_id.clone(),
            scenario_hash: meta.scenario_hash.clone(),
            mode: meta.mode,
            seed: meta.seed,
            duration_ns: meta.duration.as_nanos(),
            window_ns: w,
            aggregates: RunAggregates {
                fronthaul_samples: self.fh_queue.count,
                queue_delay: self.fh_queue.stats(&mut fq),
                total_delay: self.fh_total.stats(&mut ft),
                background_samples: self.bg_queue.count,
                background_queue_delay: self.bg_queue.stats(&mut bq),
                background_total_delay: self.bg_total.stats(&mut bt),
                min_total_delay_ns: self.min_total,
                min_packet_bytes: self.min_bytes,
                frames: self.frames,
                granted_bytes: self.granted,
                used_bytes: self.used,
                wasted_bytes: self.wasted,
                utilization: if denom == 0 {
                    0.0
                } else {
                    self.used as f64 / denom as f64
                },
                cti_msgs: self.cti_msgs,
                cti_lost: self.cti_lost,
                drops: self.drops,
                invalid_frames: self.invalid_frames,
            },
            windows,
            queue_delay_histogram: self.q_hist.clone(),
            total_delay_histogram: self.t_hist.clone(),
        }
    }
}
