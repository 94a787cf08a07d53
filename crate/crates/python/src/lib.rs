//! Python bindings for `rccat`.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rccat::datagen::{NoiseModel, OutlierModel, Placement};
use rccat::detector::{self, default_threshold};
use rccat::estimators::{self, huber_to_eta as huber, robust_mean, robust_mean_shifted};
use rccat::harness::bench::{self, BenchmarkScenario, MethodChoice, Setting};
use rccat::harness::io::{write_report_to, ReportDocument};
use rccat::{baseline, datagen, Error};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn noise_model(kind: &str, df: f64, sigma: f64) -> Result<NoiseModel, String> {
    match kind {
        "t" | "student-t" => Ok(NoiseModel::StudentT { df }),
        "gaussian" | "normal" => Ok(NoiseModel::Gaussian { sigma }),
        "garch" => Ok(NoiseModel::garch_default()),
        other => Err(format!("unknown noise `{other}` (expected t, gaussian or garch)")),
    }
}

fn outlier_model(kind: &str, value: f64, shape: f64) -> Result<OutlierModel, String> {
    match kind {
        "pareto" => Ok(OutlierModel::Pareto { shape }),
        "fixed" => Ok(OutlierModel::Fixed { value }),
        "symmetric" => Ok(OutlierModel::FixedSymmetric { value }),
        other => Err(format!(
            "unknown outliers `{other}` (expected pareto, fixed or symmetric)"
        )),
    }
}

fn placement(kind: &str) -> Result<Placement, String> {
    match kind {
        "bernoulli" => Ok(Placement::Bernoulli),
        "block" => Ok(Placement::BlockExact),
        "exact" => Ok(Placement::ExactCount),
        other => Err(format!(
            "unknown placement `{other}` (expected bernoulli, block or exact)"
        )),
    }
}

fn method_choice(kind: &str) -> Result<MethodChoice, String> {
    match kind {
        "rccat" => Ok(MethodChoice::RcCat),
        "arc" => Ok(MethodChoice::Arc),
        "both" => Ok(MethodChoice::Both),
        other => Err(format!("unknown method `{other}` (expected rccat, arc or both)")),
    }
}

fn value_err(msg: String) -> PyErr {
    PyValueError::new_err(msg)
}

/// Constants of the deviation and bias bounds.
#[pyclass(name = "EstimatorConfig", module = "rccat_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyEstimatorConfig {
    inner: estimators::EstimatorConfig,
}

#[pymethods]
impl PyEstimatorConfig {
    #[new]
    #[pyo3(signature = (M = 5.0, eta = 0.1, delta = 0.01, A = std::f64::consts::LN_2, B = 2.0, V = None))]
    #[allow(non_snake_case)]
    fn new(M: f64, eta: f64, delta: f64, A: f64, B: f64, V: Option<f64>) -> PyResult<Self> {
        let inner = estimators::EstimatorConfig {
            influence_bound: A,
            moment_bound: M,
            variance_bound: V,
            eta,
            delta,
            tail_constant: B,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter(M)]
    fn moment_bound(&self) -> f64 {
        self.inner.moment_bound
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter(A)]
    fn influence_bound(&self) -> f64 {
        self.inner.influence_bound
    }

    #[getter(B)]
    fn tail_constant(&self) -> f64 {
        self.inner.tail_constant
    }

    #[getter(V)]
    fn variance_bound(&self) -> Option<f64> {
        self.inner.variance_bound
    }

    fn select_alpha(&self, n: usize) -> PyResult<f64> {
        estimators::select_alpha(&self.inner, n).map_err(to_py)
    }

    /// `(radius, confidence, alpha)` at sample size `n`.
    fn deviation_radius(&self, n: usize) -> PyResult<(f64, f64, f64)> {
        let b = estimators::deviation_radius(&self.inner, n).map_err(to_py)?;
        Ok((b.radius, b.confidence, b.alpha_used))
    }

    /// `c0 sqrt(M eta)`.
    fn bias_bound(&self) -> PyResult<f64> {
        estimators::asymptotic_bias(&self.inner).map_err(to_py)
    }

    #[pyo3(signature = (practical = false))]
    fn threshold(&self, practical: bool) -> PyResult<f64> {
        default_threshold(&self.inner, practical).map_err(to_py)
    }

    /// Robust mean of `data` as `(estimate, alpha, radius, confidence)`.
    #[pyo3(signature = (data, shifted = false, k = None))]
    fn robust_mean(&self, data: Vec<f64>, shifted: bool, k: Option<usize>) -> PyResult<(f64, f64, f64, f64)> {
        let m = if shifted {
            robust_mean_shifted(&data, &self.inner, k)
        } else {
            robust_mean(&data, &self.inner)
        }
        .map_err(to_py)?;
        Ok((m.estimate, m.alpha, m.radius, m.confidence))
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "EstimatorConfig(M={}, eta={}, delta={}, A={}, B={}, V={:?})",
            c.moment_bound, c.eta, c.delta, c.influence_bound, c.tail_constant, c.variance_bound
        )
    }
}

/// Window, threshold, neighbourhood factor and scale of the detector.
#[pyclass(name = "DetectorConfig", module = "rccat_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyDetectorConfig {
    inner: detector::DetectorConfig,
}

#[pymethods]
impl PyDetectorConfig {
    #[new]
    #[pyo3(signature = (w, b, alpha, lambda_ = 2.0))]
    fn new(w: usize, b: f64, alpha: f64, lambda_: f64) -> PyResult<Self> {
        let inner = detector::DetectorConfig::new(w, b, lambda_, alpha).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Scale and threshold derived from the estimator constants.
    #[staticmethod]
    #[pyo3(signature = (est, w, lambda_ = 2.0, practical = false))]
    fn from_estimator(est: &PyEstimatorConfig, w: usize, lambda_: f64, practical: bool) -> PyResult<Self> {
        let inner = detector::DetectorConfig::from_estimator(&est.inner, w, lambda_, practical).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn w(&self) -> usize {
        self.inner.window
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.threshold
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "DetectorConfig(w={}, b={}, alpha={}, lambda_={})",
            c.window, c.threshold, c.alpha, c.lambda
        )
    }
}

#[pyclass(name = "DetectionReport", module = "rccat_py", frozen)]
struct PyDetectionReport {
    inner: detector::DetectionReport,
}

#[pymethods]
impl PyDetectionReport {
    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.name()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn change_points(&self) -> Vec<usize> {
        self.inner.change_points.clone()
    }

    #[getter]
    fn candidates(&self) -> Vec<usize> {
        self.inner.candidates.clone()
    }

    /// `(j, score)` pairs of the scan trace, `j` 1-based.
    #[getter]
    fn trace(&self) -> Vec<(usize, f64)> {
        self.inner.trace.iter().collect()
    }

    #[getter]
    fn config(&self) -> PyDetectorConfig {
        PyDetectorConfig {
            inner: self.inner.config_used,
        }
    }

    fn score(&self, j: usize) -> Option<f64> {
        self.inner.score(j)
    }

    /// Candidates ordered by decreasing score.
    fn ranked_candidates(&self) -> Vec<(usize, f64)> {
        self.inner.ranked_candidates()
    }

    /// The versioned JSON report the CLI writes.
    fn to_json(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        write_report_to(&ReportDocument::new(self.inner.clone(), None), &mut buf).map_err(to_py)?;
        String::from_utf8(buf).map_err(|e| value_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.change_points.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "DetectionReport(method={:?}, n={}, change_points={:?})",
            self.inner.method.name(),
            self.inner.n,
            self.inner.change_points
        )
    }
}

#[pyclass(name = "BenchmarkResult", module = "rccat_py", frozen)]
struct PyBenchmarkResult {
    inner: bench::BenchmarkResult,
}

#[pymethods]
impl PyBenchmarkResult {
    #[getter]
    fn config_hash(&self) -> &str {
        &self.inner.config_hash
    }

    /// Aligned text table, one block per window.
    fn table(&self) -> String {
        self.inner.to_table()
    }

    fn csv(&self) -> String {
        self.inner.to_csv()
    }

    /// One dict per (window, eta, method) cell.
    fn cells<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .cells
            .iter()
            .map(|c| {
                let d = PyDict::new(py);
                d.set_item("window", c.window)?;
                d.set_item("eta", c.eta)?;
                d.set_item("method", c.method.name())?;
                d.set_item("mean_error", c.mean_error)?;
                d.set_item("std_error", c.std_error)?;
                d.set_item("replications", c.replications)?;
                d.set_item("flagged", c.flagged)?;
                d.set_item("mean_detections", c.mean_detections)?;
                Ok(d)
            })
            .collect()
    }
}

/// The influence function.
#[pyfunction]
fn psi(x: f64) -> PyResult<f64> {
    estimators::psi_eval(x).map_err(to_py)
}

/// `(alpha / n) sum psi(x / alpha)`.
#[pyfunction]
fn catoni_estimate(data: Vec<f64>, alpha: f64) -> PyResult<f64> {
    estimators::catoni_estimate(&data, alpha).map_err(to_py)
}

/// Huber contamination rate to window-budget rate: `(eta, clamped)`.
#[pyfunction]
fn huber_to_eta(epsilon: f64, beta: f64, n: usize, k0: usize) -> PyResult<(f64, bool)> {
    let c = huber(epsilon, beta, n, k0).map_err(to_py)?;
    Ok((c.eta, c.clamped))
}

#[pyfunction]
fn scan_statistic(values: Vec<f64>, j: usize, w: usize, alpha: f64) -> PyResult<f64> {
    detector::scan_statistic(&values, j, w, alpha).map_err(to_py)
}

#[pyfunction]
fn detect(values: Vec<f64>, config: &PyDetectorConfig) -> PyResult<PyDetectionReport> {
    let inner = detector::detect(&values, &config.inner).map_err(to_py)?;
    Ok(PyDetectionReport { inner })
}

/// Detector with the shifting-device estimate in every window; `est` needs `V`.
#[pyfunction]
fn detect_shifted(values: Vec<f64>, config: &PyDetectorConfig, est: &PyEstimatorConfig) -> PyResult<PyDetectionReport> {
    let inner = detector::detect_shifted(&values, &config.inner, &est.inner).map_err(to_py)?;
    Ok(PyDetectionReport { inner })
}

/// The baseline detector; `split_seed` selects a random half split.
#[pyfunction]
#[pyo3(signature = (values, config, eta, split_seed = None))]
fn arc_detect(
    values: Vec<f64>,
    config: &PyDetectorConfig,
    eta: f64,
    split_seed: Option<u64>,
) -> PyResult<PyDetectionReport> {
    let split = split_seed.map_or(baseline::SplitRule::Interleaved, baseline::SplitRule::Seeded);
    let rume = baseline::RumeConfig::new(eta, split).map_err(to_py)?;
    let inner = baseline::arc_detect(&values, &config.inner, &rume).map_err(to_py)?;
    Ok(PyDetectionReport { inner })
}

#[pyfunction]
#[pyo3(signature = (data, eta, split_seed = None))]
fn rume_estimate(data: Vec<f64>, eta: f64, split_seed: Option<u64>) -> PyResult<f64> {
    let split = split_seed.map_or(baseline::SplitRule::Interleaved, baseline::SplitRule::Seeded);
    let rume = baseline::RumeConfig::new(eta, split).map_err(to_py)?;
    baseline::rume_estimate(&data, &rume).map_err(to_py)
}

/// Piecewise-constant signal: `(values, tau)`. Change points are evenly
/// spaced unless `tau` is given.
#[pyfunction]
#[pyo3(signature = (n, means, seed, tau = None, noise = "t", df = 3.0, sigma = 1.0))]
fn gen_signal(
    n: usize,
    means: Vec<f64>,
    seed: u64,
    tau: Option<Vec<usize>>,
    noise: &str,
    df: f64,
    sigma: f64,
) -> PyResult<(Vec<f64>, Vec<usize>)> {
    let mut spec = datagen::SignalSpec::evenly_spaced(n, means, noise_model(noise, df, sigma).map_err(value_err)?);
    if let Some(tau) = tau {
        spec.tau = tau;
    }
    let (series, truth) = datagen::gen_signal(&spec, seed).map_err(to_py)?;
    Ok((series.into_values(), truth.tau))
}

/// Replaces a budgeted fraction of `values` with outliers: `(values, mask)`.
#[pyfunction]
#[pyo3(signature = (values, eta, seed, k0 = 50, outliers = "fixed", value = 100.0, shape = 2.0, placement = "bernoulli"))]
#[allow(clippy::too_many_arguments)]
fn contaminate(
    values: Vec<f64>,
    eta: f64,
    seed: u64,
    k0: usize,
    outliers: &str,
    value: f64,
    shape: f64,
    placement: &str,
) -> PyResult<(Vec<f64>, Vec<bool>)> {
    let model = outlier_model(outliers, value, shape).map_err(value_err)?;
    let spec = datagen::ContaminationSpec::new(eta, k0, model, self::placement(placement).map_err(value_err)?)
        .map_err(to_py)?;
    let series = rccat::TimeSeries::new(values).map_err(to_py)?;
    let (out, mask) = datagen::apply_contamination(&series, &spec, seed).map_err(to_py)?;
    Ok((out.into_values(), mask))
}

/// Monte-Carlo comparison with the default scenario of `setting`, overridden
/// by any argument given.
#[pyfunction]
#[pyo3(signature = (setting = 1, reps = 100, seed = 0, etas = None, windows = None, method = "both", n = None, workers = None))]
#[allow(clippy::too_many_arguments)]
fn run_benchmark(
    py: Python<'_>,
    setting: u8,
    reps: usize,
    seed: u64,
    etas: Option<Vec<f64>>,
    windows: Option<Vec<usize>>,
    method: &str,
    n: Option<usize>,
    workers: Option<usize>,
) -> PyResult<PyBenchmarkResult> {
    let mut s = BenchmarkScenario::defaults_for(Setting::from_number(setting).map_err(to_py)?);
    s.replications = reps;
    s.master_seed = seed;
    s.method = method_choice(method).map_err(value_err)?;
    if let Some(etas) = etas {
        s.etas = etas;
    }
    if let Some(windows) = windows {
        s.windows = windows;
    }
    if let Some(n) = n {
        s.n = n;
    }
    s.workers = workers;
    let inner = py.detach(|| bench::run_benchmark(&s)).map_err(to_py)?;
    Ok(PyBenchmarkResult { inner })
}

#[pymodule]
fn rccat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEstimatorConfig>()?;
    m.add_class::<PyDetectorConfig>()?;
    m.add_class::<PyDetectionReport>()?;
    m.add_class::<PyBenchmarkResult>()?;
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(catoni_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(huber_to_eta, m)?)?;
    m.add_function(wrap_pyfunction!(scan_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(detect_shifted, m)?)?;
    m.add_function(wrap_pyfunction!(arc_detect, m)?)?;
    m.add_function(wrap_pyfunction!(rume_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(gen_signal, m)?)?;
    m.add_function(wrap_pyfunction!(contaminate, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
