//! Control and forecast evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{OxygenTrace, TimeAxis};

pub const MM_PER_INCH: f64 = 25.4;

/// Oxygen deficit ratio: share of samples strictly below `threshold`.
/// A sample equal to the threshold counts as safe.
pub fn odr(trace: &OxygenTrace, threshold: f64) -> Result<f64> {
    odr_values(trace.values(), threshold)
}

pub fn odr_values(values: &[f64], threshold: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("oxygen trace"));
    }
    let below = values.iter().filter(|&&o| o < threshold).count();
    Ok(below as f64 / values.len() as f64)
}

/// Deep percolation rate in inches per week.
pub fn recharge_per_week(drainage_mm: &[f64], axis: &TimeAxis) -> Result<f64> {
    if drainage_mm.len() != axis.len() {
        return Err(Error::LengthMismatch {
            what: "drainage series",
            expected: axis.len(),
            actual: drainage_mm.len(),
        });
    }
    let days = axis.duration_days();
    if days <= 0.0 {
        return Err(Error::Empty("zero-duration axis"));
    }
    if let Some(x) = drainage_mm.iter().find(|&&x| !(x >= 0.0)) {
        return Err(Error::InvalidParams(format!("negative drainage {x}")));
    }
    let total: f64 = drainage_mm.iter().sum();
    Ok(total / MM_PER_INCH / (days / 7.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastMetrics {
    pub mse: f64,
    pub mae: f64,
    /// Peak (trough) time error, hours.
    pub pte_hours: f64,
    /// Peak (trough) value error, % vol.
    pub pve: f64,
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Pointwise errors plus trough timing/value errors. The "peak" of an oxygen trace is its
/// minimum; ties resolve to the earliest index.
pub fn forecast_metrics(pred: &OxygenTrace, actual: &OxygenTrace) -> Result<ForecastMetrics> {
    metrics_values(pred.values(), actual.values(), pred.axis().step_hours())
}

pub fn metrics_values(pred: &[f64], actual: &[f64], step_hours: f64) -> Result<ForecastMetrics> {
    if pred.len() != actual.len() {
        return Err(Error::LengthMismatch {
            what: "forecast vs actual",
            expected: actual.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("trace"));
    }
    let n = pred.len() as f64;
    let (se, ae) = pred
        .iter()
        .zip(actual)
        .fold((0.0, 0.0), |(s, a), (p, y)| (s + (p - y).powi(2), a + (p - y).abs()));
    let (ip, ia) = (argmin(pred), argmin(actual));
    Ok(ForecastMetrics {
        mse: se / n,
        mae: ae / n,
        pte_hours: ip.abs_diff(ia) as f64 * step_hours,
        pve: (pred[ip] - actual[ia]).abs(),
    })
}
