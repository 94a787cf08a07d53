//! The `rccat` command line.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors. Every
//! tunable flag can also be given in a `--config` file as `key = value`,
//! keyed by the flag name without dashes; flags win over the file.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baseline::{arc_detect, RumeConfig, SplitRule};
use crate::datagen::{
    apply_contamination, derive_seed, gen_signal, ContaminationSpec, NoiseModel, OutlierModel, Placement, SignalSpec,
};
use crate::detector::{default_threshold, detect, detect_shifted, DetectorConfig};
use crate::error::Error;
use crate::estimators::{huber_to_eta, robust_mean, robust_mean_shifted, select_alpha, EstimatorConfig};
use crate::harness::bench::{run_benchmark, BenchmarkScenario, MethodChoice, Setting};
use crate::harness::config::ConfigFile;
use crate::harness::io::{self, ReportDocument, TruthDocument};
use crate::series::TimeSeries;

/// Environment variable consulted for the master seed when `--seed` is absent.
pub const SEED_ENV: &str = "RCCAT_SEED";

#[derive(Debug, Parser)]
#[command(name = "rccat", version, about = "Robust offline change-point detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect change points in a CSV series and write a JSON report.
    Detect(DetectArgs),
    /// Generate a contaminated piecewise-constant series.
    Simulate(SimulateArgs),
    /// Run the Monte-Carlo comparison and print the error tables.
    Bench(BenchArgs),
    /// Robust mean of a CSV series with its deviation radius.
    Estimate(EstimateArgs),
    /// Convert a Huber contamination rate into a window-budget rate.
    ConvertEta(ConvertEtaArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Rccat,
    Arc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlphaMode {
    Thm1,
    Shifted,
}

/// Constants shared by `detect` and `estimate`.
#[derive(Debug, Args)]
struct TheoryArgs {
    /// Contamination rate.
    #[arg(long)]
    eta: Option<f64>,
    /// Bound on the conditional second moment.
    #[arg(long = "M")]
    moment: Option<f64>,
    /// Bound on the conditional variance (shifting device).
    #[arg(long = "V")]
    variance: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Bound on the influence function.
    #[arg(long = "A")]
    influence: Option<f64>,
    #[arg(long = "B")]
    tail: Option<f64>,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Input CSV (`value` or `t,value`).
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON report path; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Per-index trace CSV for plotting.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Truth JSON from `simulate`, used to mark true changes in the trace.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Half-window length.
    #[arg(long)]
    w: Option<usize>,
    /// Threshold; defaults to 2 c0 sqrt(M eta).
    #[arg(long)]
    b: Option<f64>,
    /// Use the lower threshold c0 sqrt(M eta) / 2.
    #[arg(long)]
    practical: bool,
    #[arg(long)]
    lambda: Option<f64>,
    /// Explicit scale, overriding the deviation-bound choice.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_enum)]
    alpha_mode: Option<AlphaMode>,
    /// Seed of a random RUME half split (default: interleaved).
    #[arg(long)]
    split_seed: Option<u64>,
    #[command(flatten)]
    theory: TheoryArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NoiseArg {
    T,
    Gaussian,
    Garch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutlierArg {
    Pareto,
    Fixed,
    Symmetric,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlacementArg {
    Bernoulli,
    Block,
    Exact,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Outlier preset: 1 Pareto(2), 2 fixed at 100, 3 at +-100.
    #[arg(long)]
    setting: Option<u8>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated change points; evenly spaced when absent.
    #[arg(long)]
    tau: Option<String>,
    /// Comma-separated segment means.
    #[arg(long)]
    means: Option<String>,
    #[arg(long, value_enum)]
    noise: Option<NoiseArg>,
    #[arg(long)]
    df: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    k0: Option<usize>,
    #[arg(long, value_enum)]
    outliers: Option<OutlierArg>,
    #[arg(long)]
    outlier_value: Option<f64>,
    #[arg(long)]
    pareto_shape: Option<f64>,
    #[arg(long, value_enum)]
    placement: Option<PlacementArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Add a `t` column with positions 1..=n.
    #[arg(long)]
    timestamps: bool,
    /// Output CSV; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Ground truth and corrupted positions as JSON.
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchMethodArg {
    Rccat,
    Arc,
    Both,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    setting: Option<u8>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated contamination rates.
    #[arg(long)]
    etas: Option<String>,
    /// Comma-separated window lengths.
    #[arg(long)]
    ws: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    method: Option<BenchMethodArg>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    means: Option<String>,
    #[arg(long = "M")]
    moment: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "A")]
    influence: Option<f64>,
    #[arg(long = "B")]
    tail: Option<f64>,
    #[arg(long, value_enum)]
    placement: Option<PlacementArg>,
    #[arg(long)]
    k0: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Result CSV path.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Aligned text table path; stdout when absent.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the two-stage shifting device (needs --V).
    #[arg(long)]
    shifted: bool,
    /// Location-stage size of the shifting device (default n/2).
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    theory: TheoryArgs,
}

#[derive(Debug, Args)]
struct ConvertEtaArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k0: Option<usize>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => CliError::Usage(msg),
            other => CliError::Data(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.into())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn load_config(path: &Option<PathBuf>) -> CliResult<ConfigFile> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => ConfigFile::load(p).map_err(|e| CliError::Usage(format!("cannot read config file: {e}"))),
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::Usage(format!("invalid {what} entry `{s}`")))
        })
        .collect()
}

fn parse_enum<T: ValueEnum>(text: &str, key: &str) -> CliResult<T> {
    T::from_str(text, true).map_err(|_| CliError::Usage(format!("config key `{key}`: invalid value `{text}`")))
}

fn resolve_enum<T: ValueEnum>(file: &ConfigFile, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.raw(key).map(|v| parse_enum(v, key)).transpose(),
    }
}

fn master_seed(file: &ConfigFile, flag: Option<u64>) -> CliResult<u64> {
    if let Some(seed) = file.resolve(flag, "seed")? {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(0),
    }
}

fn estimator_from(file: &ConfigFile, t: &TheoryArgs) -> CliResult<EstimatorConfig> {
    let defaults = EstimatorConfig::default();
    let cfg = EstimatorConfig {
        influence_bound: file.resolve(t.influence, "A")?.unwrap_or(defaults.influence_bound),
        moment_bound: file.resolve(t.moment, "M")?.unwrap_or(defaults.moment_bound),
        variance_bound: file.resolve(t.variance, "V")?,
        eta: file.resolve(t.eta, "eta")?.unwrap_or(defaults.eta),
        delta: file.resolve(t.delta, "delta")?.unwrap_or(defaults.delta),
        tail_constant: file.resolve(t.tail, "B")?.unwrap_or(defaults.tail_constant),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn open_output<'a>(path: &Option<PathBuf>, stdout: &'a mut dyn Write) -> CliResult<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

fn run_detect(args: DetectArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let file = load_config(&args.config)?;
    let est = estimator_from(&file, &args.theory)?;
    let w = file.resolve(args.w, "w")?.unwrap_or(100);
    if w == 0 {
        return Err(CliError::Usage("--w must be positive".into()));
    }
    let lambda = file.resolve(args.lambda, "lambda")?.unwrap_or(2.0);
    let practical = file.switch(args.practical, "practical")?;
    let method = resolve_enum(&file, args.method, "method")?.unwrap_or(MethodArg::Rccat);
    let alpha_mode = resolve_enum(&file, args.alpha_mode, "alpha-mode")?.unwrap_or(AlphaMode::Thm1);
    let threshold = match file.resolve(args.b, "b")? {
        Some(b) => b,
        None => default_threshold(&est, practical)?,
    };
    let alpha = match file.resolve(args.alpha, "alpha")? {
        Some(a) => a,
        None => select_alpha(&est, w)?,
    };
    let cfg = DetectorConfig::new(w, threshold, lambda, alpha)?;

    let series = io::load_csv(&args.input)?;
    let values = series.values();
    let report = match (method, alpha_mode) {
        (MethodArg::Rccat, AlphaMode::Thm1) => detect(values, &cfg)?,
        (MethodArg::Rccat, AlphaMode::Shifted) => {
            if est.variance_bound.is_none() {
                return Err(CliError::Usage("--alpha-mode shifted needs --V".into()));
            }
            detect_shifted(values, &cfg, &est)?
        }
        (MethodArg::Arc, _) => {
            let eta = if est.eta > 0.0 { est.eta } else { 1e-9 };
            let split = match file.resolve(args.split_seed, "split-seed")? {
                Some(seed) => SplitRule::Seeded(seed),
                None => SplitRule::Interleaved,
            };
            arc_detect(values, &cfg, &RumeConfig::new(eta, split)?)?
        }
    };

    let truth = match file.resolve(args.truth.clone(), "truth")? {
        Some(p) => Some(io::read_truth(p)?.truth.tau),
        None => None,
    };
    if let Some(path) = file.resolve(args.trace_out.clone(), "trace-out")? {
        io::write_trace_csv(&report, truth.as_deref(), BufWriter::new(File::create(path)?))?;
    }
    let found = report.change_points.len();
    let doc = ReportDocument::new(report, Some(est));
    let output = file.resolve(args.output.clone(), "output")?;
    io::write_report_to(&doc, open_output(&output, stdout)?)?;
    writeln!(stderr, "{found} change point(s) detected")?;
    Ok(())
}

fn run_simulate(args: SimulateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let file = load_config(&args.config)?;
    let seed = master_seed(&file, args.seed)?;
    let n = file.resolve(args.n, "n")?.unwrap_or(1500);
    let means_text = file
        .resolve(args.means.clone(), "means")?
        .unwrap_or_else(|| "0,3,0".into());
    let means: Vec<f64> = parse_list(&means_text, "means")?;
    let noise = match resolve_enum(&file, args.noise, "noise")?.unwrap_or(NoiseArg::T) {
        NoiseArg::T => NoiseModel::StudentT {
            df: file.resolve(args.df, "df")?.unwrap_or(3.0),
        },
        NoiseArg::Gaussian => NoiseModel::Gaussian {
            sigma: file.resolve(args.sigma, "sigma")?.unwrap_or(1.0),
        },
        NoiseArg::Garch => NoiseModel::garch_default(),
    };
    let mut spec = SignalSpec::evenly_spaced(n, means, noise);
    if let Some(tau) = file.resolve(args.tau.clone(), "tau")? {
        spec.tau = parse_list(&tau, "tau")?;
    }
    spec.validate()?;

    let eta = file.resolve(args.eta, "eta")?.unwrap_or(0.1);
    let value = file.resolve(args.outlier_value, "outlier-value")?.unwrap_or(100.0);
    let setting = file.resolve(args.setting, "setting")?;
    let outliers = match (resolve_enum(&file, args.outliers, "outliers")?, setting) {
        (Some(OutlierArg::None), _) => None,
        (Some(OutlierArg::Pareto), _) => Some(OutlierModel::Pareto {
            shape: file.resolve(args.pareto_shape, "pareto-shape")?.unwrap_or(2.0),
        }),
        (Some(OutlierArg::Fixed), _) => Some(OutlierModel::Fixed { value }),
        (Some(OutlierArg::Symmetric), _) => Some(OutlierModel::FixedSymmetric { value }),
        (None, Some(s)) => Some(Setting::from_number(s)?.outliers()),
        (None, None) => Some(OutlierModel::Fixed { value }),
    };
    let placement = match resolve_enum(&file, args.placement, "placement")?.unwrap_or(PlacementArg::Bernoulli) {
        PlacementArg::Bernoulli => Placement::Bernoulli,
        PlacementArg::Block => Placement::BlockExact,
        PlacementArg::Exact => Placement::ExactCount,
    };
    let k0 = file.resolve(args.k0, "k0")?.unwrap_or(50);

    let (clean, truth) = gen_signal(&spec, derive_seed(seed, &[0]))?;
    let (series, mask) = match outliers {
        Some(model) if eta > 0.0 => {
            let cspec = ContaminationSpec::new(eta, k0, model, placement)?;
            for w in cspec.warnings(n) {
                writeln!(stderr, "warning: {w}")?;
            }
            apply_contamination(&clean, &cspec, derive_seed(seed, &[1]))?
        }
        _ => (clean, vec![false; n]),
    };
    let series = if file.switch(args.timestamps, "timestamps")? {
        TimeSeries::with_timestamps(series.into_values(), (1..=n).map(|t| t as f64).collect())?
    } else {
        series
    };

    let output = file.resolve(args.output.clone(), "output")?;
    io::write_csv(&series, open_output(&output, stdout)?)?;
    if let Some(path) = file.resolve(args.truth_out.clone(), "truth-out")? {
        let doc = TruthDocument {
            schema_version: io::SCHEMA_VERSION,
            seed,
            truth,
            corrupted: mask
                .iter()
                .enumerate()
                .filter(|(_, &m)| m)
                .map(|(i, _)| i + 1)
                .collect(),
        };
        io::write_truth(&doc, path)?;
    }
    Ok(())
}

fn run_bench(args: BenchArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let file = load_config(&args.config)?;
    let setting = Setting::from_number(file.resolve(args.setting, "setting")?.unwrap_or(1))?;
    let mut scenario = BenchmarkScenario::defaults_for(setting);
    scenario.master_seed = master_seed(&file, args.seed)?;
    if let Some(n) = file.resolve(args.n, "n")? {
        scenario.n = n;
    }
    if let Some(etas) = file.resolve(args.etas.clone(), "etas")? {
        scenario.etas = parse_list(&etas, "etas")?;
    }
    if let Some(ws) = file.resolve(args.ws.clone(), "ws")? {
        scenario.windows = parse_list(&ws, "ws")?;
    }
    if let Some(reps) = file.resolve(args.reps, "reps")? {
        scenario.replications = reps;
    }
    if let Some(m) = resolve_enum(&file, args.method, "method")? {
        scenario.method = match m {
            BenchMethodArg::Rccat => MethodChoice::RcCat,
            BenchMethodArg::Arc => MethodChoice::Arc,
            BenchMethodArg::Both => MethodChoice::Both,
        };
    }
    if let Some(lambda) = file.resolve(args.lambda, "lambda")? {
        scenario.lambda = lambda;
    }
    if let Some(means) = file.resolve(args.means.clone(), "means")? {
        scenario.segment_means = parse_list(&means, "means")?;
    }
    let est = &mut scenario.estimator;
    if let Some(v) = file.resolve(args.moment, "M")? {
        est.moment_bound = v;
    }
    if let Some(v) = file.resolve(args.delta, "delta")? {
        est.delta = v;
    }
    if let Some(v) = file.resolve(args.influence, "A")? {
        est.influence_bound = v;
    }
    if let Some(v) = file.resolve(args.tail, "B")? {
        est.tail_constant = v;
    }
    if let Some(p) = resolve_enum(&file, args.placement, "placement")? {
        scenario.placement = match p {
            PlacementArg::Bernoulli => Placement::Bernoulli,
            PlacementArg::Block => Placement::BlockExact,
            PlacementArg::Exact => Placement::ExactCount,
        };
    }
    if let Some(k0) = file.resolve(args.k0, "k0")? {
        scenario.k0 = k0;
    }
    scenario.workers = file.resolve(args.workers, "workers")?;

    let result = run_benchmark(&scenario)?;
    if let Some(path) = file.resolve(args.output.clone(), "output")? {
        std::fs::write(path, result.to_csv())?;
    }
    let table = file.resolve(args.table.clone(), "table")?;
    open_output(&table, stdout)?.write_all(result.to_table().as_bytes())?;
    writeln!(stderr, "detector time: {:.2}s", result.total_runtime())?;
    Ok(())
}

#[derive(Serialize)]
struct EstimateOutput {
    n: usize,
    estimate: f64,
    alpha: f64,
    radius: f64,
    confidence: f64,
    method: &'static str,
}

fn run_estimate(args: EstimateArgs, stdout: &mut dyn Write) -> CliResult {
    let file = load_config(&args.config)?;
    let est = estimator_from(&file, &args.theory)?;
    let shifted = file.switch(args.shifted, "shifted")?;
    let series = io::load_csv(&args.input)?;
    let values = series.values();
    let (mean, method) = if shifted {
        if est.variance_bound.is_none() {
            return Err(CliError::Usage("--shifted needs --V".into()));
        }
        (
            robust_mean_shifted(values, &est, file.resolve(args.k, "k")?)?,
            "shifted",
        )
    } else {
        (robust_mean(values, &est)?, "catoni")
    };
    let out = EstimateOutput {
        n: values.len(),
        estimate: mean.estimate,
        alpha: mean.alpha,
        radius: mean.radius,
        confidence: mean.confidence,
        method,
    };
    serde_json::to_writer_pretty(&mut *stdout, &out).map_err(Error::from)?;
    writeln!(stdout)?;
    Ok(())
}

fn run_convert(args: ConvertEtaArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let file = load_config(&args.config)?;
    let required = |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::Usage(format!("--{name} is required")));
    let epsilon = required(file.resolve(args.epsilon, "epsilon")?, "epsilon")?;
    let beta = required(file.resolve(args.beta, "beta")?, "beta")?;
    let n = file
        .resolve(args.n, "n")?
        .ok_or_else(|| CliError::Usage("--n is required".into()))?;
    let k0 = file
        .resolve(args.k0, "k0")?
        .ok_or_else(|| CliError::Usage("--k0 is required".into()))?;
    let conv = huber_to_eta(epsilon, beta, n, k0)?;
    if conv.clamped {
        writeln!(stderr, "warning: eta exceeded 1 and was clamped")?;
    }
    writeln!(stdout, "{}", conv.eta)?;
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    let result = match cli.command {
        Command::Detect(a) => run_detect(a, stdout, stderr),
        Command::Simulate(a) => run_simulate(a, stdout, stderr),
        Command::Bench(a) => run_bench(a, stdout, stderr),
        Command::Estimate(a) => run_estimate(a, stdout),
        Command::ConvertEta(a) => run_convert(a, stdout, stderr),
    };
    let _ = stdout.flush();
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}\n\nRun `rccat --help` for usage.");
            1
        }
        Err(CliError::Data(err)) => {
            let _ = writeln!(stderr, "error: {err}");
            2
        }
    }
}
