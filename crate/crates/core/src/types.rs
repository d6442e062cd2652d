//! Time axis and the multivariate frames shared by every other module.

use chrono::{DateTime, Duration, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sensor cadence: one reading every ten minutes.
pub const DEFAULT_STEP_SECS: i64 = 600;

/// Atmospheric oxygen fraction, % vol.
pub const O_ATM_PCT: f64 = 20.9;

/// A uniform time grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeAxis {
    start: DateTime<Utc>,
    step_secs: i64,
    count: usize,
}

impl TimeAxis {
    pub fn new(start: DateTime<Utc>, step_secs: i64, count: usize) -> Result<Self> {
        if step_secs <= 0 {
            return Err(Error::InvalidAxis(format!("step must be positive, got {step_secs}")));
        }
        Ok(Self {
            start,
            step_secs,
            count,
        })
    }

    /// Ten-minute axis.
    pub fn ten_minute(start: DateTime<Utc>, count: usize) -> Self {
        Self {
            start,
            step_secs: DEFAULT_STEP_SECS,
            count,
        }
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn step_secs(&self) -> i64 {
        self.step_secs
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn step_hours(&self) -> f64 {
        self.step_secs as f64 / 3600.0
    }

    pub fn duration_days(&self) -> f64 {
        self.count as f64 * self.step_secs as f64 / 86_400.0
    }

    pub fn timestamp(&self, i: usize) -> DateTime<Utc> {
        self.start + Duration::seconds(self.step_secs * i as i64)
    }

    /// Timestamp one step past the last sample.
    pub fn end(&self) -> DateTime<Utc> {
        self.timestamp(self.count)
    }

    /// Fractional hour of day of sample `i`, in [0, 24).
    pub fn hour_of_day(&self, i: usize) -> f64 {
        let t = self.timestamp(i);
        t.hour() as f64 + t.minute() as f64 / 60.0 + t.second() as f64 / 3600.0
    }

    /// Whole steps since the Unix epoch for sample `i`; used to align seasonal phases.
    pub fn epoch_index(&self, i: usize) -> i64 {
        self.timestamp(i).timestamp().div_euclid(self.step_secs)
    }

    pub fn with_len(&self, count: usize) -> Self {
        Self { count, ..*self }
    }

    /// Axis starting at sample `offset` of this one.
    pub fn shifted(&self, offset: usize, count: usize) -> Self {
        Self {
            start: self.timestamp(offset),
            step_secs: self.step_secs,
            count,
        }
    }

    /// Axis that starts where this one ends.
    pub fn following(&self, count: usize) -> Self {
        self.shifted(self.count, count)
    }
}

/// Observed or forecast quantities, in frame column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variate {
    Oxygen,
    Swc,
    Flood,
    Precip,
    Temp,
    Rh,
    Wind,
}

impl Variate {
    pub const COUNT: usize = 7;

    pub const ALL: [Variate; 7] = [
        Variate::Oxygen,
        Variate::Swc,
        Variate::Flood,
        Variate::Precip,
        Variate::Temp,
        Variate::Rh,
        Variate::Wind,
    ];

    /// Variates that can carry an exogenous clue (plan or weather forecast).
    pub const CLUE_BEARING: [Variate; 5] = [
        Variate::Flood,
        Variate::Precip,
        Variate::Temp,
        Variate::Rh,
        Variate::Wind,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Column name as used in CSV headers.
    pub fn column_name(self) -> &'static str {
        match self {
            Variate::Oxygen => "oxygen_pct",
            Variate::Swc => "swc",
            Variate::Flood => "flood",
            Variate::Precip => "precip_mm",
            Variate::Temp => "temp_c",
            Variate::Rh => "rh_pct",
            Variate::Wind => "wind_ms",
        }
    }

    pub fn from_column_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.column_name() == name)
    }

    /// Physical domain `[lo, hi]` of the variate.
    pub fn domain(self) -> (f64, f64) {
        match self {
            Variate::Oxygen => (0.0, O_ATM_PCT),
            Variate::Swc => (0.0, 1.0),
            Variate::Flood => (0.0, 1.0),
            Variate::Precip => (0.0, f64::INFINITY),
            Variate::Temp => (-90.0, 60.0),
            Variate::Rh => (0.0, 100.0),
            Variate::Wind => (0.0, f64::INFINITY),
        }
    }

    pub fn clamp(self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        x.clamp(lo, hi)
    }

    /// Missing samples of these columns are linearly interpolated; the rest are zero-filled.
    pub fn interpolates(self) -> bool {
        !matches!(self, Variate::Flood | Variate::Precip)
    }
}

impl std::fmt::Display for Variate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.column_name())
    }
}

/// Multivariate history `X ∈ R^{T×N}` on a uniform axis. Missing samples are NaN until
/// the frame passes [`crate::validate::validate_frame`].
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryWindow {
    axis: TimeAxis,
    columns: [Vec<f64>; Variate::COUNT],
}

impl HistoryWindow {
    pub fn new(axis: TimeAxis, columns: [Vec<f64>; Variate::COUNT]) -> Result<Self> {
        for (v, c) in Variate::ALL.iter().zip(columns.iter()) {
            if c.len() != axis.len() {
                return Err(Error::LengthMismatch {
                    what: v.column_name(),
                    expected: axis.len(),
                    actual: c.len(),
                });
            }
        }
        Ok(Self { axis, columns })
    }

    pub fn empty(axis_start: DateTime<Utc>, step_secs: i64) -> Result<Self> {
        let axis = TimeAxis::new(axis_start, step_secs, 0)?;
        Ok(Self {
            axis,
            columns: Default::default(),
        })
    }

    pub fn axis(&self) -> &TimeAxis {
        &self.axis
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    pub fn column(&self, v: Variate) -> &[f64] {
        &self.columns[v.index()]
    }

    pub(crate) fn column_mut(&mut self, v: Variate) -> &mut Vec<f64> {
        &mut self.columns[v.index()]
    }

    pub fn columns(&self) -> &[Vec<f64>; Variate::COUNT] {
        &self.columns
    }

    pub fn row(&self, i: usize) -> [f64; Variate::COUNT] {
        std::array::from_fn(|k| self.columns[k][i])
    }

    pub fn push_row(&mut self, row: [f64; Variate::COUNT]) {
        for (c, x) in self.columns.iter_mut().zip(row) {
            c.push(x);
        }
        self.axis = self.axis.with_len(self.axis.len() + 1);
    }

    /// Samples `[from, from + len)` as a new window.
    pub fn slice(&self, from: usize, len: usize) -> Result<Self> {
        if from + len > self.len() {
            return Err(Error::LengthMismatch {
                what: "slice end",
                expected: self.len(),
                actual: from + len,
            });
        }
        Ok(Self {
            axis: self.axis.shifted(from, len),
            columns: std::array::from_fn(|k| self.columns[k][from..from + len].to_vec()),
        })
    }

    /// The most recent `len` samples.
    pub fn tail(&self, len: usize) -> Result<Self> {
        if len > self.len() {
            return Err(Error::InsufficientHistory {
                need: len,
                have: self.len(),
            });
        }
        self.slice(self.len() - len, len)
    }

    /// Concatenate `other`, which must start exactly one step after this window ends.
    pub fn append(&self, other: &HistoryWindow) -> Result<Self> {
        if other.is_empty() {
            return Ok(self.clone());
        }
        if other.axis.step_secs() != self.axis.step_secs() || other.axis.start() != self.axis.end()
        {
            return Err(Error::InvalidAxis(format!(
                "appended frame starts at {} but history ends at {}",
                other.axis.start(),
                self.axis.end()
            )));
        }
        let mut out = self.clone();
        for (c, o) in out.columns.iter_mut().zip(other.columns.iter()) {
            c.extend_from_slice(o);
        }
        out.axis = self.axis.with_len(self.len() + other.len());
        Ok(out)
    }
}

/// Exogenous clues over the forecast horizon: weather forecast and a flood proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousClues {
    axis: TimeAxis,
    flood: Vec<f64>,
    precip_mm: Vec<f64>,
    temp_c: Vec<f64>,
    rh_pct: Vec<f64>,
    wind_ms: Vec<f64>,
}

impl ExogenousClues {
    pub fn new(
        axis: TimeAxis,
        flood: Vec<f64>,
        precip_mm: Vec<f64>,
        temp_c: Vec<f64>,
        rh_pct: Vec<f64>,
        wind_ms: Vec<f64>,
    ) -> Result<Self> {
        let n = axis.len();
        for (name, c) in [
            ("flood", &flood),
            ("precip_mm", &precip_mm),
            ("temp_c", &temp_c),
            ("rh_pct", &rh_pct),
            ("wind_ms", &wind_ms),
        ] {
            if c.len() != n {
                return Err(Error::LengthMismatch {
                    what: name,
                    expected: n,
                    actual: c.len(),
                });
            }
        }
        if let Some(i) = flood.iter().position(|&f| f != 0.0 && f != 1.0) {
            return Err(Error::Validation(vec![crate::error::Violation {
                column: "flood",
                index: i,
                kind: crate::error::ViolationKind::NonBinary { value: flood[i] },
            }]));
        }
        Ok(Self {
            axis,
            flood,
            precip_mm,
            temp_c,
            rh_pct,
            wind_ms,
        })
    }

    pub fn axis(&self) -> &TimeAxis {
        &self.axis
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    /// Clue column for `v`, or `None` for variates without an exogenous clue.
    pub fn column(&self, v: Variate) -> Option<&[f64]> {
        match v {
            Variate::Flood => Some(&self.flood),
            Variate::Precip => Some(&self.precip_mm),
            Variate::Temp => Some(&self.temp_c),
            Variate::Rh => Some(&self.rh_pct),
            Variate::Wind => Some(&self.wind_ms),
            Variate::Oxygen | Variate::Swc => None,
        }
    }

    /// Same weather, different flood proposal.
    pub fn with_flood(&self, flood: Vec<f64>) -> Result<Self> {
        Self::new(
            self.axis,
            flood,
            self.precip_mm.clone(),
            self.temp_c.clone(),
            self.rh_pct.clone(),
            self.wind_ms.clone(),
        )
    }
}

/// Soil oxygen trajectory, % vol.
#[derive(Debug, Clone, PartialEq)]
pub struct OxygenTrace {
    axis: TimeAxis,
    values: Vec<f64>,
}

impl OxygenTrace {
    pub fn new(axis: TimeAxis, values: Vec<f64>) -> Result<Self> {
        if values.len() != axis.len() {
            return Err(Error::LengthMismatch {
                what: "oxygen trace",
                expected: axis.len(),
                actual: values.len(),
            });
        }
        Ok(Self { axis, values })
    }

    pub fn axis(&self) -> &TimeAxis {
        &self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::min)
    }
}
