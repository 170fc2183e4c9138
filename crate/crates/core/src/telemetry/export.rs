//! Per-window exports. Both formats carry the same fields in the same order;
//! absent values are empty in CSV and `null` in JSON.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{MetricWindow, RunReport};

pub const CSV_HEADER: &str = "window_start_ns,mode,samples,mean_q_us,p50_q_us,p95_q_us,p99_q_us,mean_t_us,util,granted_B,used_B,wasted_B,cti_msgs,drops";

/// One exported window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub window_start_ns: u64,
    pub mode: String,
    pub samples: u64,
    pub mean_q_us: Option<f64>,
    pub p50_q_us: Option<f64>,
    pub p95_q_us: Option<f64>,
    pub p99_q_us: Option<f64>,
    pub mean_t_us: Option<f64>,
    pub util: f64,
    #[serde(rename = "granted_B")]
    pub granted_b: u64,
    #[serde(rename = "used_B")]
    pub used_b: u64,
    #[serde(rename = "wasted_B")]
    pub wasted_b: u64,
    pub cti_msgs: u64,
    pub drops: u64,
}

impl From<&MetricWindow> for WindowRow {
    fn from(w: &MetricWindow) -> Self {
        WindowRow {
            window_start_ns: w.window_start_ns,
            mode: w.mode.map(|m| m.as_str().to_string()).unwrap_or_default(),
            samples: w.samples,
            mean_q_us: w.queue_delay.mean_us,
            p50_q_us: w.queue_delay.p50_us,
            p95_q_us: w.queue_delay.p95_us,
            p99_q_us: w.queue_delay.p99_us,
            mean_t_us: w.total_delay.mean_us,
            util: w.utilization,
            granted_b: w.granted_bytes,
            used_b: w.used_bytes,
            wasted_b: w.wasted_bytes,
            cti_msgs: w.cti_msgs,
            drops: w.drops,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn to_csv(report: &RunReport) -> String {
    let mut out = String::with_capacity(64 * (report.windows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for w in &report.windows {
        let r = WindowRow::from(w);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.window_start_ns,
            r.mode,
            r.samples,
            opt(r.mean_q_us),
            opt(r.p50_q_us),
            opt(r.p95_q_us),
            opt(r.p99_q_us),
            opt(r.mean_t_us),
            r.util,
            r.granted_b,
            r.used_b,
            r.wasted_b,
            r.cti_msgs,
            r.drops
        );
    }
    out
}

pub fn to_json_lines(report: &RunReport) -> String {
    let mut out = String::new();
    for w in &report.windows {
        out.push_str(&serde_json::to_string(&WindowRow::from(w)).expect("rows serialize"));
        out.push('\n');
    }
    out
}
