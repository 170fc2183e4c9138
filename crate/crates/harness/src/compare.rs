//! Cooperative versus status-report runs of one scenario, side by side.

use ctipon::pon::DbaMode;
use ctipon::telemetry::RunReport;
use serde::{Deserialize, Serialize};

use crate::engine::{run_scenario, EngineError};
use crate::scenario::ScenarioConfig;

/// One metric under both modes. `delta` is SR minus CTI and `ratio` is SR
/// over CTI; either is absent when an input is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: String,
    pub cti: Option<f64>,
    pub sr: Option<f64>,
    pub delta: Option<f64>,
    pub ratio: Option<f64>,
}

impl MetricDelta {
    pub fn new(metric: &str, cti: Option<f64>, sr: Option<f64>) -> Self {
        let both = cti.zip(sr);
        MetricDelta {
            metric: metric.to_string(),
            cti,
            sr,
            delta: both.map(|(c, s)| s - c),
            ratio: both.and_then(|(c, s)| (c != 0.0).then(|| s / c)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario_id: String,
    pub seed: u64,
    pub cti_scenario_hash: String,
    pub sr_scenario_hash: String,
    pub deltas: Vec<MetricDelta>,
    pub cti: RunReport,
    pub sr: RunReport,
}

impl ComparisonReport {
    pub fn from_reports(cti: RunReport, sr: RunReport) -> Self {
        let (c, s) = (&cti.aggregates, &sr.aggregates);
        let count = |n: u64| Some(n as f64);
        let deltas = vec![
            MetricDelta::new("mean_queue_delay_us", c.queue_delay.mean_us, s.queue_delay.mean_us),
            MetricDelta::new("p50_queue_delay_us", c.queue_delay.p50_us, s.queue_delay.p50_us),
            MetricDelta::new("p95_queue_delay_us", c.queue_delay.p95_us, s.queue_delay.p95_us),
            MetricDelta::new("p99_queue_delay_us", c.queue_delay.p99_us, s.queue_delay.p99_us),
            MetricDelta::new("max_queue_delay_us", c.queue_delay.max_us, s.queue_delay.max_us),
            MetricDelta::new("mean_total_delay_us", c.total_delay.mean_us, s.total_delay.mean_us),
            MetricDelta::new("p99_total_delay_us", c.total_delay.p99_us, s.total_delay.p99_us),
            MetricDelta::new(
                "background_mean_queue_delay_us",
                c.background_queue_delay.mean_us,
                s.background_queue_delay.mean_us,
            ),
            MetricDelta::new("utilization", Some(c.utilization), Some(s.utilization)),
            MetricDelta::new("granted_bytes", count(c.granted_bytes), count(s.granted_bytes)),
            MetricDelta::new("wasted_bytes", count(c.wasted_bytes), count(s.wasted_bytes)),
            MetricDelta::new("drops", count(c.drops), count(s.drops)),
        ];
        ComparisonReport {
            scenario_id: cti.scenario_id.clone(),
            seed: cti.seed,
            cti_scenario_hash: cti.scenario_hash.clone(),
            sr_scenario_hash: sr.scenario_hash.clone(),
            deltas,
            cti,
            sr,
        }
    }

    pub fn delta(&self, metric: &str) -> Option<&MetricDelta> {
        self.deltas.iter().find(|d| d.metric == metric)
    }

    /// Plain-text summary table.
    pub fn summary(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        let mut out = format!(
            "scenario {} (seed {}, hash {})\n{:<32} {:>14} {:>14} {:>14} {:>10}\n",
            self.scenario_id,
            self.seed,
            &self.cti_scenario_hash[..12.min(self.cti_scenario_hash.len())],
            "metric",
            "cti",
            "sr",
            "sr-cti",
            "sr/cti"
        );
        for d in &self.deltas {
            out.push_str(&format!(
                "{:<32} {:>14} {:>14} {:>14} {:>10}\n",
                d.metric,
                fmt(d.cti),
                fmt(d.sr),
                fmt(d.delta),
                fmt(d.ratio)
            ));
        }
        out
    }
}

/// Runs `cfg` once per mode with the same seed.
pub fn compare(cfg: &ScenarioConfig) -> Result<ComparisonReport, EngineError> {
    let cti = run_scenario(cfg, DbaMode::Cti)?;
    let sr = run_scenario(cfg, DbaMode::Sr)?;
    Ok(ComparisonReport::from_reports(cti, sr))
}
