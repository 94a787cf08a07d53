//! ARC baseline: the same scan skeleton with a shortest-interval estimator.
//!
//! RUME splits a window in two. The shortest interval covering a `1 - eta`
//! share of the first half is located, and the estimate is the mean of the
//! second-half points inside it.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::{detect_with, DetectionReport, DetectorConfig, Method, WindowEstimator};
use crate::error::{config, domain, Result};

/// How a window is divided into the interval-selection and estimation halves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitRule {
    /// Odd positions select the interval, even positions estimate.
    Interleaved,
    /// The first `floor(m/2)` points select, the rest estimate.
    Contiguous,
    /// A seeded shuffle; the first `floor(m/2)` shuffled points select.
    Seeded(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RumeConfig {
    pub eta: f64,
    pub split: SplitRule,
}

impl RumeConfig {
    pub fn new(eta: f64, split: SplitRule) -> Result<Self> {
        let cfg = Self { eta, split };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return config(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        Ok(())
    }
}

/// Number of order statistics the interval must cover, `ceil((1 - eta) h)`.
pub fn coverage_count(eta: f64, h: usize) -> usize {
    // Guard against (1 - eta) * h landing a hair above an integer.
    let raw = ((1.0 - eta) * h as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(h)
}

/// Leftmost shortest closed interval spanning `count` consecutive values of
/// the sorted slice.
pub fn shortest_interval(sorted: &[f64], count: usize) -> Option<(f64, f64)> {
    if count == 0 || count > sorted.len() {
        return None;
    }
    let mut best = (sorted[0], sorted[count - 1]);
    for win in sorted.windows(count).skip(1) {
        let (lo, hi) = (win[0], win[count - 1]);
        if hi - lo < best.1 - best.0 {
            best = (lo, hi);
        }
    }
    Some(best)
}

fn split(data: &[f64], rule: SplitRule) -> (Vec<f64>, Vec<f64>) {
    let m = data.len();
    match rule {
        SplitRule::Interleaved => {
            let select = data.iter().skip(1).step_by(2).copied().collect();
            let estimate = data.iter().step_by(2).copied().collect();
            (select, estimate)
        }
        SplitRule::Contiguous => {
            let (a, b) = data.split_at(m / 2);
            (a.to_vec(), b.to_vec())
        }
        SplitRule::Seeded(seed) => {
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let (a, b) = order.split_at(m / 2);
            (
                a.iter().map(|&i| data[i]).collect(),
                b.iter().map(|&i| data[i]).collect(),
            )
        }
    }
}

/// The RUME estimate of a sample of at least four points.
pub fn rume_estimate(data: &[f64], cfg: &RumeConfig) -> Result<f64> {
    cfg.validate()?;
    if data.len() < 4 {
        return domain(format!("RUME needs at least 4 points, got {}", data.len()));
    }
    let (mut select, estimate) = split(data, cfg.split);
    select.sort_by(f64::total_cmp);
    let count = coverage_count(cfg.eta, select.len());
    let (lo, hi) = shortest_interval(&select, count).expect("count within 1..=h");

    let (sum, hits) = estimate
        .iter()
        .filter(|&&x| lo <= x && x <= hi)
        .fold((0.0, 0usize), |(s, c), &x| (s + x, c + 1));
    if hits == 0 {
        return Ok(lo + (hi - lo) / 2.0);
    }
    // Clamp so rounding in the sum cannot leave the interval.
    Ok((sum / hits as f64).clamp(lo, hi))
}

impl WindowEstimator for RumeConfig {
    fn estimate(&self, window: &[f64]) -> Result<f64> {
        rume_estimate(window, self)
    }
}

/// Change detection with RUME window estimates; `cfg.alpha` is unused.
pub fn arc_detect(values: &[f64], cfg: &DetectorConfig, rume: &RumeConfig) -> Result<DetectionReport> {
    rume.validate()?;
    if cfg.window < 4 {
        return domain(format!("ARC windows need at least 4 points, got w = {}", cfg.window));
    }
    detect_with(values, cfg, rume, Method::Arc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::scan_statistic_with;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn cfg(eta: f64, split: SplitRule) -> RumeConfig {
        RumeConfig::new(eta, split).unwrap()
    }

    #[test]
    fn constant_data() {
        for split in [SplitRule::Interleaved, SplitRule::Contiguous, SplitRule::Seeded(3)] {
            for eta in [0.01, 0.3, 0.9] {
                assert_eq!(rume_estimate(&[2.5; 9], &cfg(eta, split)).unwrap(), 2.5);
            }
        }
    }

    #[test]
    fn outliers_excluded_by_interval() {
        let data = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 100.0, 100.0];
        assert_eq!(rume_estimate(&data, &cfg(0.25, SplitRule::Contiguous)).unwrap(), 0.0);
        assert_eq!(rume_estimate(&data, &cfg(0.25, SplitRule::Interleaved)).unwrap(), 0.0);
    }

    #[test]
    fn midpoint_fallback() {
        // Selection half {1, 2} (odd positions); estimation half {10, 20} misses [1, 2].
        let data = [10.0, 1.0, 20.0, 2.0];
        assert_eq!(rume_estimate(&data, &cfg(0.1, SplitRule::Interleaved)).unwrap(), 1.5);
    }

    #[test]
    fn too_few_points() {
        assert!(rume_estimate(&[1.0, 2.0, 3.0], &cfg(0.1, SplitRule::Interleaved)).is_err());
        assert!(RumeConfig::new(0.0, SplitRule::Interleaved).is_err());
        assert!(RumeConfig::new(1.0, SplitRule::Interleaved).is_err());
    }

    #[test]
    fn coverage_count_rounding() {
        assert_eq!(coverage_count(0.1, 10), 9);
        assert_eq!(coverage_count(0.25, 4), 3);
        assert_eq!(coverage_count(0.3, 10), 7);
        assert_eq!(coverage_count(0.99, 10), 1);
        assert_eq!(coverage_count(0.05, 60), 57);
    }

    #[test]
    fn symmetric_noise_centres_on_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(1.5, 1.0).unwrap();
        let trials = 400;
        let mut total = 0.0;
        for _ in 0..trials {
            let data: Vec<f64> = (0..200).map(|_| normal.sample(&mut rng)).collect();
            total += rume_estimate(&data, &cfg(0.1, SplitRule::Interleaved)).unwrap();
        }
        assert!((total / trials as f64 - 1.5).abs() < 0.02);
    }

    #[test]
    fn arc_constant_series_is_quiet() {
        let values = vec![3.0; 300];
        let det = DetectorConfig::new(20, 0.1, 2.0, 1.0).unwrap();
        let report = arc_detect(&values, &det, &cfg(0.1, SplitRule::Interleaved)).unwrap();
        assert!(report.change_points.is_empty());
        assert_eq!(report.method, Method::Arc);
    }

    #[test]
    fn arc_trace_matches_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let values: Vec<f64> = (0..240)
            .map(|t| normal.sample(&mut rng) + if t > 120 { 2.0 } else { 0.0 })
            .collect();
        let det = DetectorConfig::new(24, 0.5, 2.0, 1.0).unwrap();
        let rume = cfg(0.1, SplitRule::Seeded(9));
        let report = arc_detect(&values, &det, &rume).unwrap();
        for (j, s) in report.trace.iter() {
            let left = rume_estimate(&values[j - 25..j - 1], &rume).unwrap();
            let right = rume_estimate(&values[j..j + 24], &rume).unwrap();
            assert_eq!(s, (right - left).abs());
            assert_eq!(s, scan_statistic_with(&values, j, 24, &rume).unwrap());
        }
    }

    proptest! {
        #[test]
        fn estimate_within_data_range(data in prop::collection::vec(-1e4f64..1e4, 4..120), eta in 0.01f64..0.9, seed in any::<u64>()) {
            for split in [SplitRule::Interleaved, SplitRule::Contiguous, SplitRule::Seeded(seed)] {
                let est = rume_estimate(&data, &cfg(eta, split)).unwrap();
                let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo <= est && est <= hi);
            }
        }

        #[test]
        fn interval_is_shortest(mut values in prop::collection::vec(-100f64..100.0, 1..60), eta in 0.01f64..0.99) {
            values.sort_by(f64::total_cmp);
            let count = coverage_count(eta, values.len());
            let (lo, hi) = shortest_interval(&values, count).unwrap();
            let covered = values.iter().filter(|&&x| lo <= x && x <= hi).count();
            prop_assert!(covered >= count);
            for i in 0..=values.len() - count {
                prop_assert!(values[i + count - 1] - values[i] >= hi - lo);
            }
        }
    }
}
