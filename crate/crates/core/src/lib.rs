//! Robust offline change-point detection under adversarial contamination.
//!
//! * [`estimators`]: the Catoni influence function, scale selection,
//!   deviation bounds and the shifting-device estimator.
//! * [`detector`]: the sliding-window scan statistic and the RC-Cat detector.
//! * [`baseline`]: the shortest-interval (RUME) estimator and the ARC detector.
//! * [`datagen`]: seeded synthetic series and contamination.
//! * [`harness`]: metrics, CSV/JSON I/O, the benchmark runner and the CLI.

pub mod baseline;
pub mod datagen;
pub mod detector;
mod error;
pub mod estimators;
pub mod harness;
mod series;

pub use baseline::{arc_detect, rume_estimate, RumeConfig, SplitRule};
pub use datagen::{apply_contamination, check_budget, gen_signal, ContaminationSpec, SignalSpec};
pub use detector::{detect, DetectionReport, DetectorConfig, GroundTruth, Method, ScanTrace};
pub use error::{Error, Result};
pub use estimators::{catoni_estimate, psi, select_alpha, EstimatorConfig};
pub use series::TimeSeries;
