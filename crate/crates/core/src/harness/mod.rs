//! Benchmark runner, metrics, file formats and the command line.

pub mod bench;
pub mod cli;
pub mod config;
pub mod io;
pub mod metrics;

pub use bench::{run_benchmark, BenchmarkResult, BenchmarkScenario, CellResult, MethodChoice, Setting};
pub use io::{load_csv, read_report, write_report, ReportDocument};
pub use metrics::{detection_error, ErrorMode, ErrorOutcome};
