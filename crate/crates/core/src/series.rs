use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// An ordered sequence of finite observations with optional timestamps.
///
/// Positions are 1-based in every public API that talks about time indices
/// (`t = 1..=n`); `values()[t - 1]` is the observation at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    timestamps: Option<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("value at position {} is not finite: {}", i + 1, values[i]));
        }
        Ok(Self {
            values,
            timestamps: None,
        })
    }

    pub fn with_timestamps(values: Vec<f64>, timestamps: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return domain(format!("{} timestamps for {} values", timestamps.len(), values.len()));
        }
        if let Some(i) = timestamps.iter().position(|t| !t.is_finite()) {
            return domain(format!("timestamp at position {} is not finite", i + 1));
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return domain(format!(
                "timestamps must strictly increase (positions {} and {})",
                i + 1,
                i + 2
            ));
        }
        let mut series = Self::new(values)?;
        series.timestamps = Some(timestamps);
        Ok(series)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

impl TryFrom<Vec<f64>> for TimeSeries {
    type Error = crate::Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}
