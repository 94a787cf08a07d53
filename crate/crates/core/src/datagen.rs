//! Seeded synthetic series: piecewise-constant means, heavy-tailed or
//! conditionally heteroscedastic noise, and window-budget contamination.
//!
//! Every generator draws from `ChaCha8Rng::seed_from_u64(seed)`. Per-replication
//! seeds come from [`derive_seed`], a SplitMix64 chain over the master seed
//! and a list of counters, so any replication can be re-run on its own.

use std::fmt;
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Pareto, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::detector::GroundTruth;
use crate::error::{config, Result};
pub use crate::series::TimeSeries;

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a sub-stream: SplitMix64 folded over `master` and each counter.
pub fn derive_seed(master: u64, counters: &[u64]) -> u64 {
    counters
        .iter()
        .fold(splitmix64(master), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Inlier noise `zeta_t` added to the segment means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    StudentT {
        df: f64,
    },
    Gaussian {
        sigma: f64,
    },
    /// `zeta_t = sigma_t e_t`, `sigma_t^2 = min(omega + persistence * zeta_{t-1}^2, cap)`,
    /// `e_t` standard normal. The cap bounds the conditional second moment.
    MartingaleGarch {
        omega: f64,
        persistence: f64,
        cap: f64,
    },
}

impl NoiseModel {
    pub const fn garch_default() -> Self {
        NoiseModel::MartingaleGarch {
            omega: 0.5,
            persistence: 0.3,
            cap: 4.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::StudentT { df } if !(df > 0.0 && df.is_finite()) => {
                config(format!("student-t degrees of freedom must be positive, got {df}"))
            }
            NoiseModel::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                config(format!("gaussian sigma must be non-negative, got {sigma}"))
            }
            NoiseModel::MartingaleGarch {
                omega,
                persistence,
                cap,
            } if !(omega > 0.0 && persistence >= 0.0 && cap >= omega && cap.is_finite()) => {
                config("garch noise needs omega > 0, persistence >= 0 and cap >= omega")
            }
            _ => Ok(()),
        }
    }

    /// Fills `out` with `out.len()` consecutive noise draws.
    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match *self {
            NoiseModel::StudentT { df } => {
                let dist = StudentT::new(df).expect("validated");
                out.iter_mut().for_each(|z| *z = dist.sample(rng));
            }
            NoiseModel::Gaussian { sigma } => {
                if sigma == 0.0 {
                    out.fill(0.0);
                } else {
                    let dist = Normal::new(0.0, sigma).expect("validated");
                    out.iter_mut().for_each(|z| *z = dist.sample(rng));
                }
            }
            NoiseModel::MartingaleGarch {
                omega,
                persistence,
                cap,
            } => {
                let mut prev = 0.0f64;
                for z in out.iter_mut() {
                    let var = (omega + persistence * prev * prev).min(cap);
                    let e: f64 = StandardNormal.sample(rng);
                    prev = var.sqrt() * e;
                    *z = prev;
                }
            }
        }
    }
}

/// Piecewise-constant mean signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub n: usize,
    /// Change points: segment `k` covers times `tau[k-1] + 1 ..= tau[k]`.
    pub tau: Vec<usize>,
    pub segment_means: Vec<f64>,
    pub noise: NoiseModel,
    /// Optional inclusive range every segment mean must lie in.
    pub mean_range: Option<(f64, f64)>,
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        GroundTruth::new(self.n, self.tau.clone(), self.segment_means.clone())?;
        self.noise.validate()?;
        if let Some((lo, hi)) = self.mean_range {
            if let Some(m) = self.segment_means.iter().find(|m| **m < lo || **m > hi) {
                return config(format!("segment mean {m} outside [{lo}, {hi}]"));
            }
        }
        Ok(())
    }

    /// `K` change points spaced evenly over `[0, n]`.
    pub fn evenly_spaced(n: usize, segment_means: Vec<f64>, noise: NoiseModel) -> Self {
        let segments = segment_means.len().max(1);
        let tau = (1..segments).map(|k| k * n / segments).collect();
        Self {
            n,
            tau,
            segment_means,
            noise,
            mean_range: None,
        }
    }
}

/// Generates the signal and its ground truth.
pub fn gen_signal(spec: &SignalSpec, seed: u64) -> Result<(TimeSeries, GroundTruth)> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut values = vec![0.0; spec.n];
    spec.noise.fill(&mut rng, &mut values);
    let bounds = std::iter::once(0)
        .chain(spec.tau.iter().copied())
        .chain(std::iter::once(spec.n))
        .collect::<Vec<_>>();
    for (seg, mean) in bounds.windows(2).zip(&spec.segment_means) {
        values[seg[0]..seg[1]].iter_mut().for_each(|v| *v += mean);
    }
    let truth = GroundTruth::new(spec.n, spec.tau.clone(), spec.segment_means.clone())?;
    Ok((TimeSeries::new(values)?, truth))
}

/// Source of replacement values for `OutlierModel::Custom`.
pub trait OutlierSource: Send + Sync {
    fn draw(&self, rng: &mut dyn RngCore) -> f64;
}

impl<F> OutlierSource for F
where
    F: Fn(&mut dyn RngCore) -> f64 + Send + Sync,
{
    fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        self(rng)
    }
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutlierModel {
    /// Pareto with scale 1, used as drawn (all values >= 1).
    Pareto {
        shape: f64,
    },
    Fixed {
        value: f64,
    },
    /// `+value` or `-value` with equal probability.
    FixedSymmetric {
        value: f64,
    },
    #[serde(skip)]
    Custom(Arc<dyn OutlierSource>),
}

impl fmt::Debug for OutlierModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Pareto { shape } => f.debug_struct("Pareto").field("shape", shape).finish(),
            Self::Fixed { value } => f.debug_struct("Fixed").field("value", value).finish(),
            Self::FixedSymmetric { value } => f.debug_struct("FixedSymmetric").field("value", value).finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl OutlierModel {
    fn validate(&self) -> Result<()> {
        match *self {
            OutlierModel::Pareto { shape } if !(shape > 0.0 && shape.is_finite()) => {
                config(format!("pareto shape must be positive, got {shape}"))
            }
            OutlierModel::Fixed { value } | OutlierModel::FixedSymmetric { value } if !value.is_finite() => {
                config("outlier value must be finite")
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            OutlierModel::Pareto { shape } => Pareto::new(1.0, *shape).expect("validated").sample(rng),
            OutlierModel::Fixed { value } => *value,
            OutlierModel::FixedSymmetric { value } => {
                if rng.random_bool(0.5) {
                    *value
                } else {
                    -*value
                }
            }
            OutlierModel::Custom(source) => source.draw(rng),
        }
    }
}

/// Where corrupted positions go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Each index independently with probability `eta`.
    Bernoulli,
    /// `floor(eta k0)` positions per `k0` points in a periodic pattern with a
    /// seeded phase, so every window of length `m k0` holds exactly
    /// `m floor(eta k0)` corruptions (fewer at the series ends).
    BlockExact,
    /// Exactly `floor(eta n)` positions chosen uniformly without replacement.
    ExactCount,
}

#[derive(Debug, Clone)]
pub struct ContaminationSpec {
    pub eta: f64,
    /// Minimum window length of the budget.
    pub k0: usize,
    pub outliers: OutlierModel,
    pub placement: Placement,
}

impl ContaminationSpec {
    pub fn new(eta: f64, k0: usize, outliers: OutlierModel, placement: Placement) -> Result<Self> {
        let spec = Self {
            eta,
            k0,
            outliers,
            placement,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return config(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if self.k0 == 0 {
            return config("k0 must be positive");
        }
        self.outliers.validate()
    }

    /// Soft checks that do not prevent generation.
    pub fn warnings(&self, n: usize) -> Vec<String> {
        let mut out = Vec::new();
        if n > 1 && (self.k0 as f64) < (n as f64).ln() {
            out.push(format!("k0 = {} is below log(n) = {:.2}", self.k0, (n as f64).ln()));
        }
        out
    }
}

fn block_positions(n: usize, per_block: usize, k0: usize, phase: usize) -> Vec<bool> {
    let mut slot = vec![false; k0];
    for i in 0..per_block {
        slot[i * k0 / per_block] = true;
    }
    (0..n).map(|p| slot[(p + k0 - phase) % k0]).collect()
}

/// Corrupts `series` and returns the corrupted copy with its mask.
pub fn apply_contamination(
    series: &TimeSeries,
    spec: &ContaminationSpec,
    seed: u64,
) -> Result<(TimeSeries, Vec<bool>)> {
    spec.validate()?;
    let n = series.len();
    let mut rng = rng_from_seed(seed);
    let mask = match spec.placement {
        Placement::Bernoulli => (0..n).map(|_| rng.random_bool(spec.eta)).collect(),
        Placement::BlockExact => {
            let per_block = (spec.eta * spec.k0 as f64 + 1e-9).floor() as usize;
            let phase = rng.random_range(0..spec.k0);
            block_positions(n, per_block.min(spec.k0), spec.k0, phase)
        }
        Placement::ExactCount => {
            let count = ((spec.eta * n as f64) + 1e-9).floor() as usize;
            let mut mask = vec![false; n];
            for i in index::sample(&mut rng, n, count.min(n)).into_iter() {
                mask[i] = true;
            }
            mask
        }
    };
    let mut values = series.values().to_vec();
    for (v, _) in values.iter_mut().zip(&mask).filter(|(_, &m)| m) {
        *v = spec.outliers.draw(&mut rng);
    }
    let corrupted = match series.timestamps() {
        Some(ts) => TimeSeries::with_timestamps(values, ts.to_vec())?,
        None => TimeSeries::new(values)?,
    };
    Ok((corrupted, mask))
}

/// Worst window found by [`check_budget`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetCheck {
    pub passed: bool,
    /// Largest corrupted fraction over the windows examined.
    pub sup_fraction: f64,
    /// 1-based first index of the worst window.
    pub worst_start: usize,
    pub worst_len: usize,
}

fn budget_scan(mask: &[bool], eta: f64, lengths: impl Iterator<Item = usize>, slack: f64) -> BudgetCheck {
    let n = mask.len();
    let mut prefix = vec![0usize; n + 1];
    for (i, &m) in mask.iter().enumerate() {
        prefix[i + 1] = prefix[i] + usize::from(m);
    }
    let mut worst = BudgetCheck {
        passed: true,
        sup_fraction: 0.0,
        worst_start: 1,
        worst_len: 0,
    };
    let mut worst_count = 0usize;
    for k in lengths.filter(|&k| k >= 1 && k <= n) {
        let (start, count) = (0..=n - k)
            .map(|s| (s, prefix[s + k] - prefix[s]))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("k <= n");
        // Compare count/k against worst_count/worst_len without division.
        if worst.worst_len == 0 || count * worst.worst_len > worst_count * k {
            worst_count = count;
            worst.worst_start = start + 1;
            worst.worst_len = k;
            worst.sup_fraction = count as f64 / k as f64;
        }
        if count as f64 > slack * eta * k as f64 + 1e-9 {
            worst.passed = false;
        }
    }
    worst
}

/// Checks `sup_i sum_{j<k} corrupted(i + j) <= slack * eta * k` for every
/// window length `k >= k0`. Quadratic in the mask length.
pub fn check_budget(mask: &[bool], eta: f64, k0: usize, slack: f64) -> BudgetCheck {
    budget_scan(mask, eta, k0.max(1)..=mask.len(), slack)
}

/// [`check_budget`] restricted to the given window lengths.
pub fn check_budget_at(mask: &[bool], eta: f64, lengths: &[usize], slack: f64) -> BudgetCheck {
    budget_scan(mask, eta, lengths.iter().copied(), slack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::RngCore;

    fn t3_spec() -> SignalSpec {
        SignalSpec {
            n: 1500,
            tau: vec![500, 1000],
            segment_means: vec![0.0, 3.0, -1.0],
            noise: NoiseModel::StudentT { df: 3.0 },
            mean_range: Some((-3.0, 3.0)),
        }
    }

    #[test]
    fn noiseless_step() {
        let spec = SignalSpec {
            n: 1500,
            tau: vec![750],
            segment_means: vec![0.0, 2.0],
            noise: NoiseModel::Gaussian { sigma: 0.0 },
            mean_range: None,
        };
        let (series, truth) = gen_signal(&spec, 1).unwrap();
        assert!(series.values()[..750].iter().all(|&v| v == 0.0));
        assert!(series.values()[750..].iter().all(|&v| v == 2.0));
        assert_eq!(truth.tau, vec![750]);
    }

    #[test]
    fn segment_means_recovered() {
        let (series, truth) = gen_signal(&t3_spec(), 2024).unwrap();
        let bounds = [0, 500, 1000, 1500];
        for (k, seg) in bounds.windows(2).enumerate() {
            let part = &series.values()[seg[0]..seg[1]];
            let mean = part.iter().sum::<f64>() / part.len() as f64;
            assert!((mean - truth.segment_means[k]).abs() < 0.25, "segment {k}: {mean}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_signal(&t3_spec(), 99).unwrap();
        let b = gen_signal(&t3_spec(), 99).unwrap();
        assert_eq!(a, b);
        let c = gen_signal(&t3_spec(), 100).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = t3_spec();
        spec.segment_means = vec![0.0, 4.0, 0.0];
        assert!(gen_signal(&spec, 1).is_err());
        spec.segment_means = vec![0.0, 1.0];
        assert!(gen_signal(&spec, 1).is_err());
        let mut spec = t3_spec();
        spec.tau = vec![1000, 500];
        assert!(gen_signal(&spec, 1).is_err());
        let mut spec = t3_spec();
        spec.noise = NoiseModel::StudentT { df: 0.0 };
        assert!(gen_signal(&spec, 1).is_err());
    }

    #[test]
    fn garch_second_moment_is_capped() {
        let spec = SignalSpec {
            n: 20_000,
            tau: vec![],
            segment_means: vec![0.0],
            noise: NoiseModel::garch_default(),
            mean_range: None,
        };
        let (series, _) = gen_signal(&spec, 3).unwrap();
        let v = series.values();
        let second = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        // Stationary variance 0.5 / (1 - 0.3) ~ 0.714 before capping.
        assert!(second > 0.6 && second < 0.85, "{second}");
        let lag: f64 = v.windows(2).map(|p| p[0] * p[1]).sum::<f64>() / v.len() as f64;
        assert!(lag.abs() < 0.05, "martingale differences are uncorrelated: {lag}");
    }

    #[test]
    fn evenly_spaced_changes() {
        let spec = SignalSpec::evenly_spaced(1500, vec![0.0, 1.0, 0.0], NoiseModel::Gaussian { sigma: 1.0 });
        assert_eq!(spec.tau, vec![500, 1000]);
    }

    fn base_series(n: usize) -> TimeSeries {
        TimeSeries::new((0..n).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap()
    }

    #[test]
    fn zero_budget_leaves_input_untouched() {
        let series = base_series(300);
        let spec =
            ContaminationSpec::new(0.04, 20, OutlierModel::Fixed { value: 100.0 }, Placement::BlockExact).unwrap();
        let (out, mask) = apply_contamination(&series, &spec, 1).unwrap();
        assert_eq!(out, series);
        assert!(mask.iter().all(|m| !m));
    }

    #[test]
    fn fixed_outliers() {
        let series = base_series(1000);
        let spec = ContaminationSpec::new(0.2, 50, OutlierModel::Fixed { value: 100.0 }, Placement::Bernoulli).unwrap();
        let (out, mask) = apply_contamination(&series, &spec, 7).unwrap();
        for ((o, i), m) in out.values().iter().zip(series.values()).zip(&mask) {
            if *m {
                assert_eq!(*o, 100.0);
            } else {
                assert_eq!(o, i);
            }
        }
        assert!(mask.iter().any(|&m| m));
    }

    #[test]
    fn symmetric_outliers_use_both_signs() {
        let series = base_series(2000);
        let spec = ContaminationSpec::new(
            0.3,
            50,
            OutlierModel::FixedSymmetric { value: 100.0 },
            Placement::Bernoulli,
        )
        .unwrap();
        let (out, mask) = apply_contamination(&series, &spec, 8).unwrap();
        let picked: Vec<f64> = out
            .values()
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| *v)
            .collect();
        assert!(picked.iter().all(|v| v.abs() == 100.0));
        let pos = picked.iter().filter(|v| **v > 0.0).count() as f64 / picked.len() as f64;
        assert!((pos - 0.5).abs() < 0.08, "{pos}");
    }

    #[test]
    fn pareto_outliers_at_least_scale() {
        let series = base_series(2000);
        let spec = ContaminationSpec::new(0.3, 50, OutlierModel::Pareto { shape: 2.0 }, Placement::Bernoulli).unwrap();
        let (out, mask) = apply_contamination(&series, &spec, 9).unwrap();
        assert!(out
            .values()
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .all(|(v, _)| *v >= 1.0));
    }

    #[test]
    fn custom_outliers() {
        let series = base_series(200);
        let source: Arc<dyn OutlierSource> = Arc::new(|_: &mut dyn RngCore| -7.5);
        let spec = ContaminationSpec::new(0.5, 10, OutlierModel::Custom(source), Placement::ExactCount).unwrap();
        let (out, mask) = apply_contamination(&series, &spec, 10).unwrap();
        assert_eq!(mask.iter().filter(|&&m| m).count(), 100);
        assert!(out
            .values()
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .all(|(v, _)| *v == -7.5));
    }

    #[test]
    fn exact_count_placement() {
        let series = base_series(2000);
        let spec =
            ContaminationSpec::new(0.1, 50, OutlierModel::Fixed { value: 100.0 }, Placement::ExactCount).unwrap();
        let (_, mask) = apply_contamination(&series, &spec, 11).unwrap();
        assert_eq!(mask.iter().filter(|&&m| m).count(), 200);
    }

    #[test]
    fn budget_examples() {
        let clean = vec![false; 100];
        let check = check_budget(&clean, 0.1, 10, 1.0);
        assert!(check.passed);
        assert_eq!(check.sup_fraction, 0.0);

        // eta k0 = 2, so a run of ceil(2) + 1 = 3 corruptions breaks the k0 window.
        let mut mask = vec![false; 100];
        mask[40..43].iter_mut().for_each(|m| *m = true);
        let check = check_budget(&mask, 0.2, 10, 1.0);
        assert!(!check.passed);
        assert_eq!(check.worst_len, 10);
        assert!(check.worst_start <= 41 && check.worst_start + 9 >= 43);
        assert_eq!(check.sup_fraction, 0.3);
    }

    #[test]
    fn soft_k0_warning() {
        let spec = ContaminationSpec::new(0.1, 3, OutlierModel::Fixed { value: 1.0 }, Placement::Bernoulli).unwrap();
        assert_eq!(spec.warnings(1500).len(), 1);
        let spec = ContaminationSpec { k0: 50, ..spec };
        assert!(spec.warnings(1500).is_empty());
    }

    #[test]
    fn bernoulli_fraction_concentrates() {
        let series = base_series(1500);
        let eta = 0.1;
        let spec = ContaminationSpec::new(eta, 50, OutlierModel::Fixed { value: 100.0 }, Placement::Bernoulli).unwrap();
        let tolerance = 3.0 * (eta * (1.0 - eta) / 1500.0).sqrt();
        let inside = (0..200)
            .filter(|&seed| {
                let (_, mask) = apply_contamination(&series, &spec, seed).unwrap();
                let frac = mask.iter().filter(|&&m| m).count() as f64 / 1500.0;
                (frac - eta).abs() <= tolerance
            })
            .count();
        assert!(inside >= 198, "{inside}/200");
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(7, &[0, 1]);
        assert_ne!(a, derive_seed(7, &[1, 0]));
        assert_ne!(a, derive_seed(8, &[0, 1]));
        assert_eq!(a, derive_seed(7, &[0, 1]));
    }

    proptest! {
        #[test]
        fn block_exact_meets_budget_at_multiples(
            n in 50usize..400,
            k0 in 5usize..40,
            eta in 0.01f64..0.9,
            seed in any::<u64>(),
        ) {
            let series = base_series(n);
            let spec = ContaminationSpec::new(eta, k0, OutlierModel::Fixed { value: 50.0 }, Placement::BlockExact).unwrap();
            let (out, mask) = apply_contamination(&series, &spec, seed).unwrap();
            let multiples: Vec<usize> = (1..=n / k0).map(|m| m * k0).collect();
            prop_assert!(check_budget_at(&mask, eta, &multiples, 1.0).passed);
            for ((o, i), m) in out.values().iter().zip(series.values()).zip(&mask) {
                prop_assert_eq!(*m, o != i);
            }
        }

        #[test]
        fn contamination_deterministic(seed in any::<u64>()) {
            let series = base_series(120);
            let spec = ContaminationSpec::new(0.2, 10, OutlierModel::Pareto { shape: 2.0 }, Placement::Bernoulli).unwrap();
            let a = apply_contamination(&series, &spec, seed).unwrap();
            let b = apply_contamination(&series, &spec, seed).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
