//! The RC-Cat offline change detector.
//!
//! A two-sided scan statistic compares robust means of the `w` points on
//! either side of each time index `j` (the point `j` itself belongs to
//! neither window). Indices that dominate their `lambda * w` neighbourhood
//! and whose score exceeds the threshold `b` are reported as change points.
//!
//! All indices are 1-based time positions. A change at `tau` means the new
//! segment starts at time `tau + 1`.

use std::collections::VecDeque;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::estimators::{self, psi, EstimatorConfig};

/// Algorithm inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Half-window length `w`.
    pub window: usize,
    /// Detection threshold `b`.
    pub threshold: f64,
    /// Neighbourhood factor `lambda >= 1` of the local-maximizer search.
    pub lambda: f64,
    /// Scale fed to the Catoni window estimator.
    pub alpha: f64,
}

impl DetectorConfig {
    pub fn new(window: usize, threshold: f64, lambda: f64, alpha: f64) -> Result<Self> {
        let cfg = Self {
            window,
            threshold,
            lambda,
            alpha,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Scale from the deviation bound at sample size `window` and the
    /// consistency threshold `2 c0 sqrt(M eta)` (or a quarter of it when
    /// `practical` is set).
    pub fn from_estimator(est: &EstimatorConfig, window: usize, lambda: f64, practical: bool) -> Result<Self> {
        let alpha = estimators::select_alpha(est, window)?;
        let threshold = default_threshold(est, practical)?;
        Self::new(window, threshold, lambda, alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return config("window must be positive");
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return config(format!("threshold must be non-negative, got {}", self.threshold));
        }
        if !(self.lambda.is_finite() && self.lambda >= 1.0) {
            return config(format!("lambda must be at least 1, got {}", self.lambda));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return config(format!("alpha must be positive, got {}", self.alpha));
        }
        Ok(())
    }

    /// Local-maximizer radius `h = floor(lambda * w)`.
    pub fn neighborhood(&self) -> usize {
        ((self.lambda * self.window as f64).floor() as usize).max(1)
    }
}

/// Scan scores `S_w(j)` for `j = w + 1 ..= n - w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTrace {
    pub window: usize,
    pub scores: Vec<f64>,
}

impl ScanTrace {
    pub fn first_index(&self) -> usize {
        self.window + 1
    }

    pub fn last_index(&self) -> usize {
        self.window + self.scores.len()
    }

    pub fn get(&self, j: usize) -> Option<f64> {
        j.checked_sub(self.first_index())
            .and_then(|p| self.scores.get(p).copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let first = self.first_index();
        self.scores.iter().enumerate().map(move |(p, &s)| (first + p, s))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Catoni windows with a fixed scale.
    RcCat,
    /// Catoni windows estimated with the two-stage shifting device.
    RcCatShifted,
    /// Shortest-interval (RUME) windows.
    Arc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::RcCat => "rccat",
            Method::RcCatShifted => "rccat-shifted",
            Method::Arc => "arc",
        }
    }
}

/// Output of a detector run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub method: Method,
    pub n: usize,
    /// Detected change points, ascending.
    pub change_points: Vec<usize>,
    /// Local maximizers before thresholding, ascending.
    pub candidates: Vec<usize>,
    pub trace: ScanTrace,
    pub config_used: DetectorConfig,
}

impl DetectionReport {
    pub fn score(&self, j: usize) -> Option<f64> {
        self.trace.get(j)
    }

    /// Candidates paired with their scores, highest score first (earlier
    /// index first on ties).
    pub fn ranked_candidates(&self) -> Vec<(usize, f64)> {
        let mut ranked: Vec<(usize, f64)> = self
            .candidates
            .iter()
            .map(|&j| (j, self.trace.get(j).unwrap_or(0.0)))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked
    }
}

/// A robust location estimate over one window.
pub trait WindowEstimator: Sync {
    fn estimate(&self, window: &[f64]) -> Result<f64>;
}

/// Catoni estimator at a fixed scale.
#[derive(Debug, Clone, Copy)]
pub struct CatoniWindow {
    pub alpha: f64,
}

impl WindowEstimator for CatoniWindow {
    fn estimate(&self, window: &[f64]) -> Result<f64> {
        estimators::catoni_estimate(window, self.alpha)
    }
}

/// Shifting-device estimator with an even split of every window.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedWindow {
    pub config: EstimatorConfig,
}

impl WindowEstimator for ShiftedWindow {
    fn estimate(&self, window: &[f64]) -> Result<f64> {
        estimators::shifting_device_estimate(window, &self.config, None)
    }
}

fn check_scan_index(n: usize, j: usize, w: usize) -> Result<()> {
    if w == 0 {
        return domain("window must be positive");
    }
    if j < w + 1 || j + w > n {
        return domain(format!(
            "index {j} outside the scan range {}..={} for n = {n}, w = {w}",
            w + 1,
            n.saturating_sub(w)
        ));
    }
    Ok(())
}

/// Left window `{j-w, ..., j-1}` and right window `{j+1, ..., j+w}`.
fn windows(values: &[f64], j: usize, w: usize) -> (&[f64], &[f64]) {
    (&values[j - w - 1..j - 1], &values[j..j + w])
}

/// `S_w(j) = |Psi(right) - Psi(left)|` for one index.
pub fn scan_statistic(values: &[f64], j: usize, w: usize, alpha: f64) -> Result<f64> {
    scan_statistic_with(values, j, w, &CatoniWindow { alpha })
}

pub fn scan_statistic_with<E: WindowEstimator + ?Sized>(
    values: &[f64],
    j: usize,
    w: usize,
    estimator: &E,
) -> Result<f64> {
    check_scan_index(values.len(), j, w)?;
    let (left, right) = windows(values, j, w);
    Ok((estimator.estimate(right)? - estimator.estimate(left)?).abs())
}

fn check_trace_len(n: usize, w: usize) -> Result<()> {
    if w == 0 {
        return domain("window must be positive");
    }
    if n <= 2 * w {
        return domain(format!(
            "series of length {n} is too short for window {w} (need n > 2w)"
        ));
    }
    Ok(())
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct RunningSum {
    sum: f64,
    carry: f64,
}

impl RunningSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Full scan trace in O(n): the window sums of `psi(x / alpha)` are slid one
/// step at a time.
pub fn compute_trace(values: &[f64], cfg: &DetectorConfig) -> Result<ScanTrace> {
    cfg.validate()?;
    let (n, w, alpha) = (values.len(), cfg.window, cfg.alpha);
    check_trace_len(n, w)?;
    let influence: Vec<f64> = values.iter().map(|&x| psi(x / alpha)).collect();

    // 0-based: left = [j-w-1, j-1), right = [j, j+w) for 1-based j.
    let mut left = RunningSum::default();
    let mut right = RunningSum::default();
    influence[..w].iter().for_each(|&v| left.add(v));
    influence[w + 1..2 * w + 1].iter().for_each(|&v| right.add(v));

    let scale = alpha / w as f64;
    let mut scores = Vec::with_capacity(n - 2 * w);
    for j in w + 1..=n - w {
        if j > w + 1 {
            left.add(influence[j - 2]);
            left.add(-influence[j - w - 2]);
            right.add(influence[j + w - 1]);
            right.add(-influence[j - 1]);
        }
        scores.push(scale * (right.value() - left.value()).abs());
    }
    Ok(ScanTrace { window: w, scores })
}

/// O(nw) trace recomputing every window from scratch.
pub fn compute_trace_brute(values: &[f64], cfg: &DetectorConfig) -> Result<ScanTrace> {
    cfg.validate()?;
    scan_trace_with(values, cfg.window, &CatoniWindow { alpha: cfg.alpha })
}

/// Trace for an arbitrary window estimator, evaluating each index independently.
pub fn scan_trace_with<E: WindowEstimator + ?Sized>(values: &[f64], w: usize, estimator: &E) -> Result<ScanTrace> {
    check_trace_len(values.len(), w)?;
    let scores = (w + 1..=values.len() - w)
        .into_par_iter()
        .map(|j| {
            let (left, right) = windows(values, j, w);
            Ok((estimator.estimate(right)? - estimator.estimate(left)?).abs())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanTrace { window: w, scores })
}

/// Maximum of `scores[p - back ..= p + ahead]` (clipped) for every `p`.
fn sliding_max(scores: &[f64], back: usize, ahead: usize) -> Vec<f64> {
    let n = scores.len();
    let mut out = Vec::with_capacity(n);
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for p in 0..n {
        let hi = (p + ahead).min(n - 1);
        while next <= hi {
            while deque.back().is_some_and(|&q| scores[q] <= scores[next]) {
                deque.pop_back();
            }
            deque.push_back(next);
            next += 1;
        }
        let lo = p.saturating_sub(back);
        while deque.front().is_some_and(|&q| q < lo) {
            deque.pop_front();
        }
        out.push(scores[*deque.front().expect("window is never empty")]);
    }
    out
}

/// Indices `j` in `valid` with `S(j) >= S(k)` for every trace index `k`
/// with `|k - j| < h`.
///
/// Within a run of equal scores only the leftmost index is kept: `j` is
/// dropped when an index in `[j - max(h-1, 1), j - 1]` has the same score.
/// Indices outside the trace are not compared.
pub fn local_maximizers(trace: &ScanTrace, h: usize, valid: RangeInclusive<usize>) -> Vec<usize> {
    let scores = &trace.scores;
    if scores.is_empty() || h == 0 {
        return Vec::new();
    }
    let first = trace.first_index();
    let lo = (*valid.start()).max(first);
    let hi = (*valid.end()).min(trace.last_index());
    if lo > hi {
        return Vec::new();
    }
    let around = sliding_max(scores, h - 1, h - 1);
    let left_reach = (h - 1).max(1);

    let mut out = Vec::new();
    for j in lo..=hi {
        let p = j - first;
        let s = scores[p];
        if s < around[p] {
            continue;
        }
        let start = p.saturating_sub(left_reach);
        if scores[start..p].contains(&s) {
            continue;
        }
        out.push(j);
    }
    out
}

fn finish(method: Method, n: usize, trace: ScanTrace, cfg: &DetectorConfig) -> DetectionReport {
    let h = cfg.neighborhood();
    let candidates = if n > 2 * h {
        local_maximizers(&trace, h, h + 1..=n - h)
    } else {
        Vec::new()
    };
    let change_points = candidates
        .iter()
        .copied()
        .filter(|&j| trace.get(j).is_some_and(|s| s > cfg.threshold))
        .collect();
    DetectionReport {
        method,
        n,
        change_points,
        candidates,
        trace,
        config_used: *cfg,
    }
}

fn check_detect_len(n: usize, cfg: &DetectorConfig) -> Result<()> {
    let h = cfg.neighborhood();
    if n <= 2 * h || n <= 2 * cfg.window {
        return domain(format!(
            "series of length {n} is too short: need n > 2 lambda w = {}",
            2 * h
        ));
    }
    Ok(())
}

/// Runs the full detector with Catoni windows.
pub fn detect(values: &[f64], cfg: &DetectorConfig) -> Result<DetectionReport> {
    cfg.validate()?;
    check_detect_len(values.len(), cfg)?;
    let trace = compute_trace(values, cfg)?;
    Ok(finish(Method::RcCat, values.len(), trace, cfg))
}

/// Runs the detector pipeline with any window estimator.
pub fn detect_with<E: WindowEstimator + ?Sized>(
    values: &[f64],
    cfg: &DetectorConfig,
    estimator: &E,
    method: Method,
) -> Result<DetectionReport> {
    cfg.validate()?;
    check_detect_len(values.len(), cfg)?;
    let trace = scan_trace_with(values, cfg.window, estimator)?;
    Ok(finish(method, values.len(), trace, cfg))
}

/// Detector using the shifting-device estimate in every window.
pub fn detect_shifted(values: &[f64], cfg: &DetectorConfig, est: &EstimatorConfig) -> Result<DetectionReport> {
    if est.variance_bound.is_none() {
        return config("the shifted scan needs a variance bound V");
    }
    detect_with(values, cfg, &ShiftedWindow { config: *est }, Method::RcCatShifted)
}

/// Threshold `2 c0 sqrt(M eta)`, or `c0 sqrt(M eta) / 2` when `practical`.
pub fn default_threshold(cfg: &EstimatorConfig, practical: bool) -> Result<f64> {
    let level = estimators::asymptotic_bias(cfg)?;
    Ok(if practical { level / 2.0 } else { 2.0 * level })
}

/// True change points and segment means of a simulated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub n: usize,
    /// Last index of each segment but the final one; strictly increasing in `(0, n)`.
    pub tau: Vec<usize>,
    pub segment_means: Vec<f64>,
}

impl GroundTruth {
    pub fn new(n: usize, tau: Vec<usize>, segment_means: Vec<f64>) -> Result<Self> {
        if segment_means.len() != tau.len() + 1 {
            return domain(format!(
                "{} change points need {} segment means, got {}",
                tau.len(),
                tau.len() + 1,
                segment_means.len()
            ));
        }
        if tau.iter().any(|&t| t == 0 || t >= n) || tau.windows(2).any(|p| p[1] <= p[0]) {
            return domain(format!("change points {tau:?} must strictly increase inside (0, {n})"));
        }
        if segment_means.iter().any(|m| !m.is_finite()) {
            return domain("segment means must be finite");
        }
        Ok(Self { n, tau, segment_means })
    }

    /// Smallest gap between consecutive change points, counting `0` and `n`.
    pub fn min_spacing(&self) -> Option<usize> {
        if self.tau.is_empty() {
            return None;
        }
        std::iter::once(0)
            .chain(self.tau.iter().copied())
            .chain(std::iter::once(self.n))
            .collect::<Vec<_>>()
            .windows(2)
            .map(|p| p[1] - p[0])
            .min()
    }

    /// Smallest absolute mean shift across a change.
    pub fn min_jump(&self) -> Option<f64> {
        self.segment_means
            .windows(2)
            .map(|p| (p[1] - p[0]).abs())
            .min_by(f64::total_cmp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub passed: bool,
    /// Measured quantity (`None` when vacuous).
    pub measured: Option<f64>,
    pub required: f64,
    /// `measured - required`.
    pub margin: Option<f64>,
}

impl AssumptionCheck {
    fn strictly_above(measured: Option<f64>, required: f64) -> Self {
        match measured {
            None => Self {
                passed: true,
                measured: None,
                required,
                margin: None,
            },
            Some(m) => Self {
                passed: m > required,
                measured: Some(m),
                required,
                margin: Some(m - required),
            },
        }
    }
}

/// Spacing and jump-size conditions under which the detector is consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Minimal spacing exceeds `lambda * w`.
    pub spacing: AssumptionCheck,
    /// Minimal jump exceeds `sqrt(3 b)`.
    pub jump: AssumptionCheck,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.spacing.passed && self.jump.passed
    }
}

pub fn validate_assumptions(gt: &GroundTruth, cfg: &DetectorConfig) -> AssumptionReport {
    AssumptionReport {
        spacing: AssumptionCheck::strictly_above(gt.min_spacing().map(|s| s as f64), cfg.lambda * cfg.window as f64),
        jump: AssumptionCheck::strictly_above(gt.min_jump(), (3.0 * cfg.threshold).sqrt()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn step(n: usize, tau: usize, height: f64) -> Vec<f64> {
        (1..=n).map(|t| if t <= tau { 0.0 } else { height }).collect()
    }

    fn trace_of(scores: &[f64], window: usize) -> ScanTrace {
        ScanTrace {
            window,
            scores: scores.to_vec(),
        }
    }

    /// Direct transcription of the local-maximizer definition plus the
    /// leftmost-tie rule, O(n h).
    fn naive_maximizers(trace: &ScanTrace, h: usize, valid: RangeInclusive<usize>) -> Vec<usize> {
        let mut out = Vec::new();
        for j in valid {
            let Some(s) = trace.get(j) else { continue };
            let dominated = (j.saturating_sub(h - 1)..=j + h - 1)
                .filter_map(|k| trace.get(k))
                .any(|t| t > s);
            let tied_left = (j.saturating_sub((h - 1).max(1))..j)
                .filter_map(|k| trace.get(k))
                .any(|t| t == s);
            if !dominated && !tied_left {
                out.push(j);
            }
        }
        out
    }

    #[test]
    fn constant_series_scores_zero() {
        let values = vec![1.7; 80];
        let cfg = DetectorConfig::new(10, 0.1, 1.0, 3.0).unwrap();
        let trace = compute_trace(&values, &cfg).unwrap();
        assert!(trace.scores.iter().all(|&s| s == 0.0));
        assert_eq!(scan_statistic(&values, 11, 10, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn step_peaks_at_change() {
        let values = step(300, 100, 2.0);
        let cfg = DetectorConfig::new(20, 0.5, 1.0, 100.0).unwrap();
        let trace = compute_trace(&values, &cfg).unwrap();
        let best = trace
            .iter()
            .fold((0, f64::MIN), |acc, (j, s)| if s > acc.1 { (j, s) } else { acc });
        assert_eq!(best.0, 100);
        // 100 * -ln(1 - 0.02 + 0.0002)
        let expected = 100.0 * -(1.0f64 - 0.02 + 0.0002).ln();
        assert_relative_eq!(
            scan_statistic(&values, 100, 20, 100.0).unwrap(),
            expected,
            max_relative = 1e-12
        );
        assert!((expected - 2.0).abs() < 1e-3);
    }

    #[test]
    fn saturated_windows_score_zero() {
        let values: Vec<f64> = (0..50).map(|i| 5.0 + i as f64).collect();
        for j in 6..=45 {
            assert_eq!(scan_statistic(&values, j, 5, 4.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn scan_index_out_of_range() {
        let values = vec![0.0; 30];
        assert!(scan_statistic(&values, 5, 5, 1.0).is_err());
        assert!(scan_statistic(&values, 26, 5, 1.0).is_err());
        assert!(scan_statistic(&values, 6, 5, 1.0).is_ok());
        assert!(scan_statistic(&values, 25, 5, 1.0).is_ok());
    }

    #[test]
    fn trace_index_arithmetic() {
        let values = vec![0.0; 100];
        let cfg = DetectorConfig::new(30, 1.0, 1.0, 1.0).unwrap();
        let trace = compute_trace(&values, &cfg).unwrap();
        assert_eq!(trace.len(), 40);
        assert_eq!(trace.first_index(), 31);
        assert_eq!(trace.last_index(), 70);
        let short = DetectorConfig::new(50, 1.0, 1.0, 1.0).unwrap();
        assert!(compute_trace(&values, &short).is_err());
    }

    #[test]
    fn maximizer_examples() {
        let peak = trace_of(&[0.0, 1.0, 2.0, 1.0, 0.0], 30);
        assert_eq!(local_maximizers(&peak, 2, 31..=35), vec![33]);

        // With h = 1 no neighbour is compared; the plateau keeps only its left end.
        let plateau = trace_of(&[1.0, 2.0, 2.0, 1.0], 0);
        let found = local_maximizers(&plateau, 1, 1..=4);
        assert!(found.contains(&2) && !found.contains(&3));
        assert_eq!(found, vec![1, 2, 4]);
        assert_eq!(local_maximizers(&plateau, 2, 1..=4), vec![2]);

        let rising = trace_of(&[1.0, 2.0, 3.0, 4.0, 5.0], 0);
        // 5 lies in the neighbourhood of 4 even when outside the valid range.
        assert!(local_maximizers(&rising, 2, 1..=4).is_empty());
        assert_eq!(local_maximizers(&rising, 2, 1..=5), vec![5]);
        assert!(local_maximizers(&rising, 2, RangeInclusive::new(7, 3)).is_empty());
    }

    #[test]
    fn noiseless_step_single_detection() {
        let values = step(1500, 750, 2.0);
        let cfg = DetectorConfig::new(100, 0.5, 2.0, 5.0).unwrap();
        let report = detect(&values, &cfg).unwrap();
        assert_eq!(report.change_points.len(), 1);
        assert!(report.change_points[0].abs_diff(750) <= 100);
        assert_eq!(report.change_points, vec![750]);
    }

    #[test]
    fn detect_requires_long_series() {
        let cfg = DetectorConfig::new(10, 0.5, 2.0, 5.0).unwrap();
        assert!(detect(&vec![0.0; 40], &cfg).is_err());
        assert!(detect(&vec![0.0; 41], &cfg).is_ok());
    }

    #[test]
    fn threshold_defaults() {
        let est = EstimatorConfig::new(10.0, 0.1, 0.01).unwrap();
        let theory = default_threshold(&est, false).unwrap();
        let practical = default_threshold(&est, true).unwrap();
        assert_relative_eq!(theory, 3.723_297_411_059_034, max_relative = 1e-12);
        assert_relative_eq!(practical, 0.930_824_352_764_758_5, max_relative = 1e-12);
        assert_eq!(practical, theory / 4.0);
        let clean = EstimatorConfig::new(10.0, 0.0, 0.01).unwrap();
        assert_eq!(default_threshold(&clean, false).unwrap(), 0.0);
        assert_eq!(default_threshold(&clean, true).unwrap(), 0.0);
    }

    #[test]
    fn assumption_diagnostics() {
        let cfg = DetectorConfig::new(100, 3.72, 2.0, 1.0).unwrap();
        let gt = GroundTruth::new(1500, vec![500, 1000], vec![0.0, 2.0, 0.0]).unwrap();
        let report = validate_assumptions(&gt, &cfg);
        assert!(report.spacing.passed);
        assert_eq!(report.spacing.margin, Some(300.0));
        assert!(!report.jump.passed);
        assert_relative_eq!(report.jump.required, (3.0f64 * 3.72).sqrt());
        assert!(!report.all_passed());

        let none = GroundTruth::new(1500, vec![], vec![1.0]).unwrap();
        let vacuous = validate_assumptions(&none, &cfg);
        assert!(vacuous.all_passed());
        assert_eq!(vacuous.spacing.measured, None);
    }

    #[test]
    fn ground_truth_validation() {
        assert!(GroundTruth::new(100, vec![50], vec![0.0]).is_err());
        assert!(GroundTruth::new(100, vec![0], vec![0.0, 1.0]).is_err());
        assert!(GroundTruth::new(100, vec![60, 40], vec![0.0, 1.0, 2.0]).is_err());
        let gt = GroundTruth::new(100, vec![30, 90], vec![0.0, 1.0, -0.5]).unwrap();
        assert_eq!(gt.min_spacing(), Some(10));
        assert_eq!(gt.min_jump(), Some(1.0));
    }

    #[test]
    fn shifted_scan_needs_variance() {
        let values = step(200, 100, 2.0);
        let cfg = DetectorConfig::new(20, 0.5, 1.0, 5.0).unwrap();
        let est = EstimatorConfig::new(10.0, 0.1, 0.01).unwrap();
        assert!(detect_shifted(&values, &cfg, &est).is_err());
        let est = est.with_variance_bound(1.0).unwrap();
        let report = detect_shifted(&values, &cfg, &est).unwrap();
        assert_eq!(report.change_points, vec![100]);
        assert_eq!(report.method, Method::RcCatShifted);
    }

    fn arb_scores() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((0u8..6).prop_map(f64::from), 1..80)
    }

    proptest! {
        #[test]
        fn sliding_trace_matches_brute_force(
            values in prop::collection::vec(-20f64..20.0, 12..200),
            w in 1usize..6,
            alpha in 0.2f64..30.0,
        ) {
            let cfg = DetectorConfig::new(w, 0.1, 1.0, alpha).unwrap();
            let fast = compute_trace(&values, &cfg).unwrap();
            let slow = compute_trace_brute(&values, &cfg).unwrap();
            prop_assert_eq!(fast.len(), slow.len());
            for (a, b) in fast.scores.iter().zip(&slow.scores) {
                prop_assert!((a - b).abs() <= 1e-12 * alpha, "{} vs {}", a, b);
            }
        }

        #[test]
        fn maximizers_match_naive(scores in arb_scores(), h in 1usize..6, lo in 0usize..10, span in 0usize..90) {
            let trace = trace_of(&scores, 3);
            let valid = lo..=lo + span;
            prop_assert_eq!(
                local_maximizers(&trace, h, valid.clone()),
                naive_maximizers(&trace, h, valid)
            );
        }

        #[test]
        fn maximizers_are_separated(scores in arb_scores(), h in 1usize..6) {
            let trace = trace_of(&scores, 0);
            let found = local_maximizers(&trace, h, 1..=scores.len());
            for pair in found.windows(2) {
                prop_assert!(pair[1] - pair[0] >= h);
            }
        }

        #[test]
        fn maximizers_scale_invariant(scores in arb_scores(), h in 1usize..6, c in 0.01f64..100.0) {
            let trace = trace_of(&scores, 2);
            let scaled = trace_of(&scores.iter().map(|s| s * c).collect::<Vec<_>>(), 2);
            let range = 1..=scores.len() + 2;
            prop_assert_eq!(local_maximizers(&trace, h, range.clone()), local_maximizers(&scaled, h, range));
        }

        #[test]
        fn raising_threshold_never_adds(values in prop::collection::vec(-5f64..5.0, 60..160), b1 in 0f64..2.0, extra in 0f64..2.0) {
            let low = DetectorConfig::new(8, b1, 2.0, 3.0).unwrap();
            let high = DetectorConfig { threshold: b1 + extra, ..low };
            let a = detect(&values, &low).unwrap();
            let b = detect(&values, &high).unwrap();
            prop_assert!(b.change_points.iter().all(|j| a.change_points.contains(j)));
        }

        #[test]
        fn output_discipline(values in prop::collection::vec(-5f64..5.0, 60..200), b in 0f64..1.0, lambda in 1f64..3.0) {
            let cfg = DetectorConfig::new(7, b, lambda, 2.0).unwrap();
            prop_assume!(values.len() > 2 * cfg.neighborhood());
            let report = detect(&values, &cfg).unwrap();
            let h = cfg.neighborhood();
            let n = values.len();
            for &j in &report.change_points {
                prop_assert!(j > h && j <= n - h);
                prop_assert!(report.score(j).unwrap() > b);
            }
            for pair in report.change_points.windows(2) {
                prop_assert!(pair[1] - pair[0] >= h);
            }
        }

        #[test]
        fn prepending_constant_shifts_detections(m in 0usize..50, tau in 150usize..250) {
            let cfg = DetectorConfig::new(20, 0.5, 2.0, 5.0).unwrap();
            let base = step(400, tau, 2.0);
            let mut shifted = vec![0.0; m];
            shifted.extend_from_slice(&base);
            let a = detect(&base, &cfg).unwrap();
            let b = detect(&shifted, &cfg).unwrap();
            let moved: Vec<usize> = a.change_points.iter().map(|j| j + m).collect();
            prop_assert_eq!(moved, b.change_points);
        }
    }
}
