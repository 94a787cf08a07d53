//! CSV series and JSON report I/O.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{DetectionReport, GroundTruth};
use crate::error::{Error, Result};
use crate::estimators::EstimatorConfig;
use crate::series::TimeSeries;

pub const SCHEMA_VERSION: u32 = 1;

fn parse_error(path: Option<&Path>, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.map(Path::to_path_buf),
        line,
        message: message.into(),
    }
}

fn parse_number(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok()
}

/// Reads a series from CSV with columns `value` or `t,value`; the header row
/// is optional.
pub fn read_csv<R: Read>(reader: R, path: Option<&Path>) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut columns: Option<usize> = None;
    let mut values = Vec::new();
    let mut stamps = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(row as u64 + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if row == 0 && record.iter().any(|f| parse_number(f).is_none()) {
            let names: Vec<String> = record.iter().map(|f| f.to_ascii_lowercase()).collect();
            columns = Some(match names.as_slice() {
                [v] if v == "value" => 1,
                [t, v] if t == "t" && v == "value" => 2,
                _ => {
                    return Err(parse_error(
                        path,
                        line,
                        format!("expected header `value` or `t,value`, found `{}`", names.join(",")),
                    ))
                }
            });
            continue;
        }
        let width = *columns.get_or_insert(record.len());
        if !(1..=2).contains(&width) {
            return Err(parse_error(
                path,
                line,
                format!("expected 1 or 2 columns, found {width}"),
            ));
        }
        if record.len() != width {
            return Err(parse_error(
                path,
                line,
                format!("expected {width} column(s), found {}", record.len()),
            ));
        }
        let mut nums = Vec::with_capacity(width);
        for field in record.iter() {
            let v = parse_number(field).ok_or_else(|| parse_error(path, line, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(path, line, format!("`{field}` is not a finite number")));
            }
            nums.push(v);
        }
        if width == 2 {
            if stamps.last().is_some_and(|&prev| nums[0] <= prev) {
                return Err(parse_error(path, line, "timestamps must strictly increase"));
            }
            stamps.push(nums[0]);
        }
        values.push(nums[width - 1]);
    }
    if values.is_empty() {
        return Err(Error::EmptyInput(path.map(Path::to_path_buf)));
    }
    if columns == Some(2) {
        TimeSeries::with_timestamps(values, stamps)
    } else {
        TimeSeries::new(values)
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_csv(BufReader::new(file), Some(path))
}

/// Writes `value` (or `t,value` when timestamps exist) with a header row.
pub fn write_csv<W: Write>(series: &TimeSeries, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    match series.timestamps() {
        Some(ts) => {
            wtr.write_record(["t", "value"])?;
            for (t, v) in ts.iter().zip(series.values()) {
                wtr.write_record([t.to_string(), v.to_string()])?;
            }
        }
        None => {
            wtr.write_record(["value"])?;
            for v in series.values() {
                wtr.write_record([v.to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    write_csv(series, BufWriter::new(File::create(path)?))
}

/// Versioned JSON wrapper around a [`DetectionReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub generator: String,
    pub version: String,
    /// Estimator constants the detector configuration was derived from.
    pub estimator: Option<EstimatorConfig>,
    pub report: DetectionReport,
}

impl ReportDocument {
    pub fn new(report: DetectionReport, estimator: Option<EstimatorConfig>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            generator: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            estimator,
            report,
        }
    }
}

pub fn write_report_to<W: Write>(doc: &ReportDocument, writer: W) -> Result<()> {
    let mut writer = writer;
    serde_json::to_writer_pretty(&mut writer, doc)?;
    writeln!(writer)?;
    Ok(())
}

pub fn write_report(doc: &ReportDocument, path: impl AsRef<Path>) -> Result<()> {
    write_report_to(doc, BufWriter::new(File::create(path)?))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ReportDocument> {
    let doc: ReportDocument = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported report schema version {}",
            doc.schema_version
        )));
    }
    Ok(doc)
}

/// Tidy per-index trace for plotting: `j,score,candidate,detected,true_change`.
pub fn write_trace_csv<W: Write>(report: &DetectionReport, truth: Option<&[usize]>, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["j", "score", "candidate", "detected", "true_change"])?;
    let flag = |hit: bool| if hit { "1" } else { "0" };
    for (j, s) in report.trace.iter() {
        let is_true = truth.is_some_and(|t| t.contains(&j));
        wtr.write_record([
            j.to_string(),
            s.to_string(),
            flag(report.candidates.binary_search(&j).is_ok()).to_string(),
            flag(report.change_points.binary_search(&j).is_ok()).to_string(),
            flag(is_true).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Ground truth of a simulated series plus the corrupted positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDocument {
    pub schema_version: u32,
    pub seed: u64,
    pub truth: GroundTruth,
    /// 1-based corrupted positions.
    pub corrupted: Vec<usize>,
}

pub fn write_truth(doc: &TruthDocument, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, doc)?;
    writeln!(w)?;
    Ok(())
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<TruthDocument> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<TimeSeries> {
        read_csv(text.as_bytes(), None)
    }

    #[test]
    fn header_and_plain_rows() {
        assert_eq!(parse("value\n1.0\n2.0\n").unwrap().values(), &[1.0, 2.0]);
        assert_eq!(parse("1.5\n-2\n").unwrap().values(), &[1.5, -2.0]);
        let s = parse("t,value\n0,1\n1,2\n").unwrap();
        assert_eq!(s.timestamps(), Some(&[0.0, 1.0][..]));
        assert_eq!(s.values(), &[1.0, 2.0]);
        let s = parse("10,1\n20,2\n").unwrap();
        assert_eq!(s.timestamps(), Some(&[10.0, 20.0][..]));
    }

    #[test]
    fn nan_row_names_its_line() {
        let err = parse("value\n1.0\nnan\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_line(parse("value\n1\ninf\n")) == 3);
    }

    fn err_line(r: Result<TimeSeries>) -> u64 {
        match r {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse(""), Err(Error::EmptyInput(_))));
        assert!(matches!(parse("value\n"), Err(Error::EmptyInput(_))));
        assert_eq!(err_line(parse("value\n1\nabc\n")), 3);
        assert_eq!(err_line(parse("t,value\n0,1\n1\n")), 3);
        assert_eq!(err_line(parse("t,value\n2,1\n1,1\n")), 3);
        assert_eq!(err_line(parse("speed\n1\n")), 1);
        assert_eq!(err_line(parse("1,2,3\n")), 1);
    }

    #[test]
    fn trace_csv_layout() {
        let values: Vec<f64> = (1..=60).map(|t| if t <= 30 { 0.0 } else { 1.0 }).collect();
        let cfg = crate::detector::DetectorConfig::new(5, 0.3, 2.0, 5.0).unwrap();
        let report = crate::detector::detect(&values, &cfg).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&report, Some(&[30]), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("j,score,candidate,detected,true_change"));
        assert_eq!(text.lines().count(), 1 + report.trace.len());
        assert!(text.lines().any(|l| l.starts_with("30,") && l.ends_with(",1,1,1")));
    }
}
