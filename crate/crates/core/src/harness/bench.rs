//! Monte-Carlo benchmark comparing RC-Cat and ARC on contaminated two-change
//! series, scored by the top-K detection error.
//!
//! Replication `r` of contamination level `etas[e]` draws its signal from
//! `derive_seed(master, [e, r, 0])` and its contamination from
//! `derive_seed(master, [e, r, 1])`. All windows and methods of that
//! replication see the same data.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline::{arc_detect, RumeConfig, SplitRule};
use crate::datagen::{
    apply_contamination, derive_seed, gen_signal, ContaminationSpec, NoiseModel, OutlierModel, Placement, SignalSpec,
};
use crate::detector::{default_threshold, detect, DetectionReport, DetectorConfig, Method};
use crate::error::{config, Error, Result};
use crate::estimators::{select_alpha, EstimatorConfig};
use crate::harness::metrics::topk_error;

/// Outlier distribution of the synthetic comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Pareto(2) outliers.
    One,
    /// Outliers fixed at 100.
    Two,
    /// Outliers at +100 or -100.
    Three,
    Custom(OutlierModel),
}

impl Setting {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Setting::One),
            2 => Ok(Setting::Two),
            3 => Ok(Setting::Three),
            _ => config(format!("setting must be 1, 2 or 3, got {n}")),
        }
    }

    pub fn outliers(&self) -> OutlierModel {
        match self {
            Setting::One => OutlierModel::Pareto { shape: 2.0 },
            Setting::Two => OutlierModel::Fixed { value: 100.0 },
            Setting::Three => OutlierModel::FixedSymmetric { value: 100.0 },
            Setting::Custom(model) => model.clone(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Setting::One => "Setting 1".into(),
            Setting::Two => "Setting 2".into(),
            Setting::Three => "Setting 3".into(),
            Setting::Custom(model) => format!("Custom {model:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    RcCat,
    Arc,
    Both,
}

impl MethodChoice {
    fn methods(self) -> &'static [Method] {
        match self {
            MethodChoice::RcCat => &[Method::RcCat],
            MethodChoice::Arc => &[Method::Arc],
            MethodChoice::Both => &[Method::RcCat, Method::Arc],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkScenario {
    pub setting: Setting,
    pub n: usize,
    pub etas: Vec<f64>,
    pub windows: Vec<usize>,
    pub replications: usize,
    pub method: MethodChoice,
    pub master_seed: u64,
    /// Means of the evenly spaced segments.
    pub segment_means: Vec<f64>,
    pub noise: NoiseModel,
    pub lambda: f64,
    /// `M`, `delta`, `A`, `B`; `eta` is replaced by each grid value.
    pub estimator: EstimatorConfig,
    pub placement: Placement,
    pub k0: usize,
    /// Worker threads; `None` uses every core. Does not affect results.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl BenchmarkScenario {
    /// Two equally spaced changes in `n = 1500` points, t(3) inliers,
    /// `delta = 0.01, A = ln 2, B = 2, M = 5`, the full eta and window grids.
    pub fn defaults_for(setting: Setting) -> Self {
        Self {
            setting,
            n: 1500,
            etas: vec![0.05, 0.1, 0.2, 0.3, 0.4],
            windows: vec![80, 100, 120],
            replications: 100,
            method: MethodChoice::Both,
            master_seed: 0,
            segment_means: vec![0.0, 3.0, 0.0],
            noise: NoiseModel::StudentT { df: 3.0 },
            lambda: 2.0,
            estimator: EstimatorConfig {
                moment_bound: 5.0,
                delta: 0.01,
                ..EstimatorConfig::default()
            },
            placement: Placement::Bernoulli,
            k0: 50,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.etas.is_empty() || self.windows.is_empty() {
            return config("eta and window grids must be non-empty");
        }
        if self.replications == 0 {
            return config("replications must be at least 1");
        }
        if self.segment_means.len() < 2 {
            return config("at least two segments are needed");
        }
        for &eta in &self.etas {
            self.cell_estimator(eta)?;
        }
        for &w in &self.windows {
            let h = (self.lambda * w as f64).floor() as usize;
            if w < 4 || self.n <= 2 * h {
                return config(format!(
                    "window {w} does not fit n = {} with lambda = {}",
                    self.n, self.lambda
                ));
            }
        }
        Ok(())
    }

    fn cell_estimator(&self, eta: f64) -> Result<EstimatorConfig> {
        let cfg = EstimatorConfig { eta, ..self.estimator };
        cfg.validate()?;
        if eta <= 0.0 {
            return config("benchmark contamination rates must be positive");
        }
        Ok(cfg)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn config_hash(&self) -> String {
        // Custom outlier closures do not serialise; they hash as empty.
        let json = serde_json::to_vec(self).unwrap_or_default();
        Sha256::digest(&json).iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Aggregate over the replications of one (window, eta, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub window: usize,
    pub eta: f64,
    pub method: Method,
    pub mean_error: f64,
    pub std_error: f64,
    pub replications: usize,
    /// Replications with fewer than `K` candidates.
    pub flagged: usize,
    /// Mean number of threshold-passing detections.
    pub mean_detections: f64,
    /// Detector time summed over replications.
    pub runtime_secs: f64,
    pub seed_derivation: String,
}

impl CellResult {
    pub fn is_flagged(&self) -> bool {
        self.flagged > 0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub scenario: BenchmarkScenario,
    pub config_hash: String,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, Copy)]
struct RepOutcome {
    error: f64,
    flagged: bool,
    detections: usize,
    elapsed: Duration,
}

/// One replication's generated data and its true change points.
pub fn replication_data(scenario: &BenchmarkScenario, eta_index: usize, rep: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    let eta = scenario.etas[eta_index];
    let signal = SignalSpec::evenly_spaced(scenario.n, scenario.segment_means.clone(), scenario.noise);
    let (clean, truth) = gen_signal(
        &signal,
        derive_seed(scenario.master_seed, &[eta_index as u64, rep as u64, 0]),
    )?;
    let spec = ContaminationSpec::new(eta, scenario.k0, scenario.setting.outliers(), scenario.placement)?;
    let (dirty, _) = apply_contamination(
        &clean,
        &spec,
        derive_seed(scenario.master_seed, &[eta_index as u64, rep as u64, 1]),
    )?;
    Ok((dirty.into_values(), truth.tau))
}

/// Detector configuration of one cell: scale from the deviation bound at
/// sample size `w`, consistency threshold.
pub fn cell_detector(scenario: &BenchmarkScenario, eta: f64, w: usize) -> Result<DetectorConfig> {
    let est = scenario.cell_estimator(eta)?;
    DetectorConfig::new(
        w,
        default_threshold(&est, false)?,
        scenario.lambda,
        select_alpha(&est, w)?,
    )
}

fn run_method(method: Method, values: &[f64], cfg: &DetectorConfig, eta: f64) -> Result<DetectionReport> {
    match method {
        Method::RcCat => detect(values, cfg),
        Method::Arc => arc_detect(values, cfg, &RumeConfig::new(eta, SplitRule::Interleaved)?),
        Method::RcCatShifted => Err(Error::Config("the benchmark does not run the shifted scan".into())),
    }
}

fn replicate(scenario: &BenchmarkScenario, eta_index: usize, rep: usize) -> Result<Vec<RepOutcome>> {
    let eta = scenario.etas[eta_index];
    let (values, truth) = replication_data(scenario, eta_index, rep)?;
    let mut out = Vec::new();
    for &w in &scenario.windows {
        let cfg = cell_detector(scenario, eta, w)?;
        for &method in scenario.method.methods() {
            let start = Instant::now();
            let report = run_method(method, &values, &cfg, eta)?;
            let elapsed = start.elapsed();
            let scored = report.ranked_candidates();
            let outcome = topk_error(&scored, &truth, scenario.n)?;
            out.push(RepOutcome {
                error: outcome.error,
                flagged: outcome.flagged,
                detections: report.change_points.len(),
                elapsed,
            });
        }
    }
    Ok(out)
}

pub fn run_benchmark(scenario: &BenchmarkScenario) -> Result<BenchmarkResult> {
    scenario.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(scenario.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let methods = scenario.method.methods();
    let mut cells = Vec::new();
    for (e, &eta) in scenario.etas.iter().enumerate() {
        let reps: Vec<Vec<RepOutcome>> = pool.install(|| {
            (0..scenario.replications)
                .into_par_iter()
                .map(|r| replicate(scenario, e, r))
                .collect::<Result<_>>()
        })?;
        for (wi, &w) in scenario.windows.iter().enumerate() {
            for (mi, &method) in methods.iter().enumerate() {
                let slot = wi * methods.len() + mi;
                let samples: Vec<RepOutcome> = reps.iter().map(|r| r[slot]).collect();
                cells.push(aggregate(w, eta, e, method, &samples));
            }
        }
    }
    // Table order: window, then method, then eta.
    cells.sort_by(|a, b| {
        let mi = |m: Method| methods.iter().position(|x| *x == m);
        a.window
            .cmp(&b.window)
            .then(mi(a.method).cmp(&mi(b.method)))
            .then(a.eta.total_cmp(&b.eta))
    });
    Ok(BenchmarkResult {
        config_hash: scenario.config_hash(),
        scenario: scenario.clone(),
        cells,
    })
}

fn aggregate(window: usize, eta: f64, eta_index: usize, method: Method, samples: &[RepOutcome]) -> CellResult {
    let count = samples.len() as f64;
    let mean = samples.iter().map(|s| s.error).sum::<f64>() / count;
    let std_error = if samples.len() > 1 {
        let var = samples.iter().map(|s| (s.error - mean).powi(2)).sum::<f64>() / (count - 1.0);
        (var / count).sqrt()
    } else {
        0.0
    };
    CellResult {
        window,
        eta,
        method,
        mean_error: mean,
        std_error,
        replications: samples.len(),
        flagged: samples.iter().filter(|s| s.flagged).count(),
        mean_detections: samples.iter().map(|s| s.detections as f64).sum::<f64>() / count,
        runtime_secs: samples.iter().map(|s| s.elapsed.as_secs_f64()).sum(),
        seed_derivation: format!("derive_seed(master, [{eta_index}, rep, 0|1])"),
    }
}

fn method_label(m: Method) -> &'static str {
    match m {
        Method::RcCat => "RC-Cat",
        Method::RcCatShifted => "RC-Cat/shifted",
        Method::Arc => "ARC",
    }
}

impl BenchmarkResult {
    pub fn cell(&self, window: usize, eta: f64, method: Method) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.window == window && c.method == method && (c.eta - eta).abs() < 1e-12)
    }

    /// One block per window; rows are methods, columns the eta grid. Flagged
    /// cells carry a `*`. Timing is deliberately left out so the table is
    /// reproducible byte for byte.
    pub fn to_table(&self) -> String {
        let s = &self.scenario;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{}: n = {}, replications = {}, master seed = {}, config {}",
            s.setting.label(),
            s.n,
            s.replications,
            s.master_seed,
            self.config_hash
        );
        for &w in &s.windows {
            let _ = writeln!(out, "\nw = {w}");
            let _ = write!(out, "{:<10}", "eta");
            for eta in &s.etas {
                let _ = write!(out, "{:>10}", format!("{eta}"));
            }
            out.push('\n');
            for &m in s.method.methods() {
                let _ = write!(out, "{:<10}", method_label(m));
                for &eta in &s.etas {
                    let cell = self.cell(w, eta, m).expect("every cell is computed");
                    let mark = if cell.is_flagged() { "*" } else { "" };
                    let _ = write!(out, "{:>10}", format!("{:.1}{mark}", cell.mean_error));
                }
                out.push('\n');
            }
        }
        out
    }

    /// `window,eta,method,mean_error,std_error,replications,flagged,mean_detections`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("window,eta,method,mean_error,std_error,replications,flagged,mean_detections\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.window,
                c.eta,
                c.method.name(),
                c.mean_error,
                c.std_error,
                c.replications,
                c.flagged,
                c.mean_detections
            );
        }
        out
    }

    pub fn total_runtime(&self) -> f64 {
        self.cells.iter().map(|c| c.runtime_secs).sum()
    }
}
