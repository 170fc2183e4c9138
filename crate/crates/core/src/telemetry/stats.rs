use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sim::RngStream;

/// Nearest-rank percentile of sorted data: the value at rank `ceil(p/100 * n)`.
pub fn nearest_rank(sorted: &[u64], pct: u32) -> Option<u64> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len() as u64;
    let rank = (pct as u64 * n).div_ceil(100).clamp(1, n);
    Some(sorted[rank as usize - 1])
}

/// Uniform fixed-size sample of a stream (Algorithm R).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reservoir<T> {
    cap: usize,
    seen: u64,
    items: Vec<T>,
}

impl<T: Clone> Reservoir<T> {
    pub fn new(cap: usize) -> Self {
        Reservoir {
            cap,
            seen: 0,
            items: Vec::new(),
        }
    }

    /// Draws from `rng` only once the reservoir is full.
    pub fn offer(&mut self, item: T, rng: &mut RngStream) {
        self.seen += 1;
        if self.items.len() < self.cap {
            self.items.push(item);
        } else {
            let j = rng.random_range(0..self.seen);
            if (j as usize) < self.cap {
                self.items[j as usize] = item;
            }
        }
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }
}

/// Exact count, mean, min and max alongside reservoir percentiles, all in
/// microseconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: u64,
    pub mean_us: Option<f64>,
    pub min_us: Option<f64>,
    pub max_us: Option<f64>,
    pub p50_us: Option<f64>,
    pub p95_us: Option<f64>,
    pub p99_us: Option<f64>,
}

fn us(ns: u64) -> f64 {
    ns as f64 / 1_000.0
}

/// Running accumulator for one latency quantity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Moments {
    pub count: u64,
    pub sum_ns: u128,
    pub min_ns: Option<u64>,
    pub max_ns: Option<u64>,
}

impl Moments {
    pub fn add(&mut self, ns: u64) {
        self.count += 1;
        self.sum_ns += ns as u128;
        self.min_ns = Some(self.min_ns.map_or(ns, |m| m.min(ns)));
        self.max_ns = Some(self.max_ns.map_or(ns, |m| m.max(ns)));
    }

    pub fn mean_us(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_ns as f64 / self.count as f64 / 1_000.0)
    }

    /// Combines the exact moments with percentiles over `sample` (values in
    /// ns, any order).
    pub fn stats(&self, sample: &mut [u64]) -> LatencyStats {
        sample.sort_unstable();
        LatencyStats {
            count: self.count,
            mean_us: self.mean_us(),
            min_us: self.min_ns.map(us),
            max_us: self.max_ns.map(us),
            p50_us: nearest_rank(sample, 50).map(us),
            p95_us: nearest_rank(sample, 95).map(us),
            p99_us: nearest_rank(sample, 99).map(us),
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn nearest_rank_on_three_points() {
        let v = [1_000_000, 2_000_000, 3_000_000];
        assert_eq!(nearest_rank(&v, 50), Some(2_000_000));
        assert_eq!(nearest_rank(&v, 99), Some(3_000_000));
        assert_eq!(nearest_rank(&v, 0), Some(1_000_000));
        assert_eq!(nearest_rank(&[], 50), None);
    }

    #[test]
    fn single_sample_mean() {
        let mut m = Moments::default();
        m.add(100_000);
        let s = m.stats(&mut [100_000]);
        assert_eq!(s.mean_us, Some(100.0));
        assert_eq!(s.p99_us, Some(100.0));
    }

    #[test]
    fn empty_stats_are_absent() {
        let s = Moments::default().stats(&mut []);
        assert_eq!(s.count, 0);
        assert_eq!(s.mean_us, None);
        assert_eq!(s.p50_us, None);
    }

    #[test]
    fn reservoir_keeps_everything_below_cap() {
        let mut rng = RngStream::new(1, "telemetry");
        let mut r = Reservoir::new(10);
        for i in 0..10u64 {
            r.offer(i, &mut rng);
        }
        assert_eq!(r.items(), &(0..10).collect::<Vec<_>>()[..]);
        for i in 10..1_000u64 {
            r.offer(i, &mut rng);
        }
        assert_eq!(r.items().len(), 10);
        assert_eq!(r.seen(), 1_000);
    }

    #[test]
    fn reservoir_is_roughly_uniform() {
        // Mean of a uniform sample of 0..100,000 should sit near 50,000.
        let mut rng = RngStream::new(3, "telemetry");
        let mut r = Reservoir::new(4_096);
        for i in 0..100_000u64 {
            r.offer(i, &mut rng);
        }
        let mean = r.items().iter().sum::<u64>() as f64 / 4_096.0;
        assert!((mean - 50_000.0).abs() < 2_500.0, "{mean}");
    }

    proptest! {
        #[test]
        fn percentiles_are_monotone(mut v in proptest::collection::vec(0u64..10_000_000, 1..500)) {
            v.sort_unstable();
            let p50 = nearest_rank(&v, 50).unwrap();
            let p95 = nearest_rank(&v, 95).unwrap();
            let p99 = nearest_rank(&v, 99).unwrap();
            prop_assert!(p50 <= p95 && p95 <= p99);
        }

        #[test]
        fn nearest_rank_matches_definition(v in proptest::collection::vec(0u64..1_000, 1..200), pct in 1u32..=100) {
            let mut s = v.clone();
            s.sort_unstable();
            let got = nearest_rank(&s, pct).unwrap();
            // Smallest value with at least pct% of the data at or below it.
            let need = (pct as f64 / 100.0) * s.len() as f64;
            let reference = *s
                .iter()
                .find(|&&x| s.iter().filter(|&&y| y <= x).count() as f64 >= need - 1e-9)
                .unwrap();
            prop_assert_eq!(got, reference);
        }
    }
}
