use serde::{Deserialize, Serialize};

/// Lower edge of the first regular bin.
pub const HIST_MIN_NS: u64 = 1_000;
/// Upper edge of the last regular bin.
pub const HIST_MAX_NS: u64 = 100_000_000;
pub const BINS_PER_DECADE: u32 = 10;
const DECADES: u32 = 5;
pub const REGULAR_BINS: usize = (BINS_PER_DECADE * DECADES) as usize;

/// Bin edges in ns, `REGULAR_BINS + 1` of them, rounded to whole ns.
pub fn bin_edges() -> Vec<u64> {
    (0..=REGULAR_BINS)
        .map(|i| {
            let e = HIST_MIN_NS as f64 * 10f64.powf(i as f64 / BINS_PER_DECADE as f64);
            e.round() as u64
        })
        .collect()
}

/// Log-spaced latency histogram from 1 us to 100 ms with underflow and
/// overflow bins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges_ns: Vec<u64>,
    pub underflow: u64,
    pub counts: Vec<u64>,
    pub overflow: u64,
}

impl Default for Histogram {
    fn default() -> Self {
        Histogram {
            edges_ns: bin_edges(),
            underflow: 0,
            counts: vec![0; REGULAR_BINS],
            overflow: 0,
        }
    }
}

impl Histogram {
    pub fn add(&mut self, ns: u64) {
        if ns < self.edges_ns[0] {
            self.underflow += 1;
        } else if ns >= self.edges_ns[REGULAR_BINS] {
            self.overflow += 1;
        } else {
            // Index of the last edge <= ns.
            let i = self.edges_ns.partition_point(|&e| e <= ns) - 1;
            self.counts[i] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.underflow + self.overflow + self.counts.iter().sum::<u64>()
    }

    /// Bounds `[lo, hi)` of the bin holding the nearest-rank `pct`
    /// percentile. Underflow reports `[0, 1 us)`; overflow reports
    /// `[100 ms, u64::MAX)`.
    pub fn percentile_bin(&self, pct: u32) -> Option<(u64, u64)> {
        let n = self.total();
        if n == 0 {
            return None;
        }
        let rank = (pct as u64 * n).div_ceil(100).clamp(1, n);
        let mut acc = self.underflow;
        if acc >= rank {
            return Some((0, self.edges_ns[0]));
        }
        for (i, &c) in self.counts.iter().enumerate() {
            acc += c;
            if acc >= rank {
                return Some((self.edges_ns[i], self.edges_ns[i + 1]));
            }
        }
        Some((self.edges_ns[REGULAR_BINS], u64::MAX))
    }
}
