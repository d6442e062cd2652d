//! Weather ingestion, synthesis and forecast perturbation.
//!
//! Two file formats are accepted:
//!
//! * historical CSV with the exact header `timestamp,precip_mm,temp_c,rh_pct,wind_ms` on a
//!   ten-minute grid;
//! * an hourly forecast JSON document whose `hourly` object carries equal-length arrays
//!   `time`, `precipitation`, `temperature_2m`, `relative_humidity_2m` and `wind_speed_10m`.
//!   Hourly values are resampled to ten minutes: precipitation is split evenly over the six
//!   sub-steps, the other fields are linearly interpolated.

use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{TimeAxis, DEFAULT_STEP_SECS};

pub const CSV_HEADER: [&str; 5] = ["timestamp", "precip_mm", "temp_c", "rh_pct", "wind_ms"];

const STEPS_PER_HOUR: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub timestamp: DateTime<Utc>,
    pub precip_mm: f64,
    pub temp_c: f64,
    pub rh_pct: f64,
    pub wind_ms: f64,
}

/// Column-oriented weather series on a uniform axis.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    axis: TimeAxis,
    pub precip_mm: Vec<f64>,
    pub temp_c: Vec<f64>,
    pub rh_pct: Vec<f64>,
    pub wind_ms: Vec<f64>,
}

impl WeatherSeries {
    pub fn new(
        axis: TimeAxis,
        precip_mm: Vec<f64>,
        temp_c: Vec<f64>,
        rh_pct: Vec<f64>,
        wind_ms: Vec<f64>,
    ) -> Result<Self> {
        for (name, c) in [
            ("precip_mm", &precip_mm),
            ("temp_c", &temp_c),
            ("rh_pct", &rh_pct),
            ("wind_ms", &wind_ms),
        ] {
            if c.len() != axis.len() {
                return Err(Error::LengthMismatch {
                    what: name,
                    expected: axis.len(),
                    actual: c.len(),
                });
            }
        }
        Ok(Self {
            axis,
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

    pub fn record(&self, i: usize) -> WeatherRecord {
        WeatherRecord {
            timestamp: self.axis.timestamp(i),
            precip_mm: self.precip_mm[i],
            temp_c: self.temp_c[i],
            rh_pct: self.rh_pct[i],
            wind_ms: self.wind_ms[i],
        }
    }

    pub fn records(&self) -> impl Iterator<Item = WeatherRecord> + '_ {
        (0..self.len()).map(|i| self.record(i))
    }

    pub fn slice(&self, from: usize, len: usize) -> Result<Self> {
        if from + len > self.len() {
            return Err(Error::LengthMismatch {
                what: "weather slice end",
                expected: self.len(),
                actual: from + len,
            });
        }
        let r = from..from + len;
        Ok(Self {
            axis: self.axis.shifted(from, len),
            precip_mm: self.precip_mm[r.clone()].to_vec(),
            temp_c: self.temp_c[r.clone()].to_vec(),
            rh_pct: self.rh_pct[r.clone()].to_vec(),
            wind_ms: self.wind_ms[r].to_vec(),
        })
    }

    /// Same samples with precipitation zeroed.
    pub fn dry(&self) -> Self {
        Self {
            precip_mm: vec![0.0; self.len()],
            ..self.clone()
        }
    }
}

pub(crate) fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc());
        }
    }
    None
}

pub(crate) fn format_timestamp(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub(crate) fn parse_number(s: &str, line: usize, column: &str) -> Result<f64> {
    let x: f64 = s.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("column {column}: cannot parse {s:?} as a number"),
    })?;
    if !x.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("column {column}: non-finite value {s:?}"),
        });
    }
    Ok(x)
}

/// Read a uniform ten-minute weather CSV.
pub fn load_csv<R: Read>(reader: R) -> Result<WeatherSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != CSV_HEADER {
        let missing: Vec<&str> = CSV_HEADER
            .iter()
            .copied()
            .filter(|c| !got.contains(c))
            .collect();
        return Err(Error::Schema(if missing.is_empty() {
            format!("header must be exactly {:?}, got {:?}", CSV_HEADER.join(","), got.join(","))
        } else {
            format!("missing column(s): {}", missing.join(", "))
        }));
    }

    let mut times = Vec::new();
    let mut cols: [Vec<f64>; 4] = Default::default();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let ts = parse_timestamp(&rec[0]).ok_or_else(|| Error::Parse {
            line,
            msg: format!("bad timestamp {:?}", &rec[0]),
        })?;
        if let Some(&prev) = times.last() {
            let dt = ts.signed_duration_since(prev).num_seconds();
            if dt <= 0 {
                return Err(Error::Parse {
                    line,
                    msg: format!("timestamps not strictly increasing ({prev} then {ts})"),
                });
            }
            if dt != DEFAULT_STEP_SECS {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-uniform spacing: {dt} s (expected {DEFAULT_STEP_SECS})"),
                });
            }
        }
        times.push(ts);
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(parse_number(&rec[j + 1], line, CSV_HEADER[j + 1])?);
        }
    }
    let start = *times.first().ok_or(Error::Empty("weather csv has no rows"))?;
    let [precip, temp, rh, wind] = cols;
    if let Some(i) = precip.iter().position(|&p| p < 0.0) {
        return Err(Error::Parse {
            line: i + 2,
            msg: "negative precipitation".into(),
        });
    }
    if let Some(i) = rh.iter().position(|&r| !(0.0..=100.0).contains(&r)) {
        return Err(Error::Parse {
            line: i + 2,
            msg: "relative humidity outside [0, 100]".into(),
        });
    }
    WeatherSeries::new(TimeAxis::ten_minute(start, times.len()), precip, temp, rh, wind)
}

pub fn write_csv<W: Write>(series: &WeatherSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in series.records() {
        w.write_record([
            format_timestamp(r.timestamp),
            r.precip_mm.to_string(),
            r.temp_c.to_string(),
            r.rh_pct.to_string(),
            r.wind_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct ForecastDoc {
    hourly: HourlyBlock,
}

#[derive(Deserialize)]
struct HourlyBlock {
    time: Vec<String>,
    precipitation: Vec<f64>,
    temperature_2m: Vec<f64>,
    relative_humidity_2m: Vec<f64>,
    wind_speed_10m: Vec<f64>,
}

/// Parse an hourly forecast document and resample it to ten-minute steps.
pub fn load_forecast_json(document: &str) -> Result<WeatherSeries> {
    let doc: ForecastDoc =
        serde_json::from_str(document).map_err(|e| Error::Schema(e.to_string()))?;
    let h = doc.hourly;
    let n = h.time.len();
    for (name, len) in [
        ("precipitation", h.precipitation.len()),
        ("temperature_2m", h.temperature_2m.len()),
        ("relative_humidity_2m", h.relative_humidity_2m.len()),
        ("wind_speed_10m", h.wind_speed_10m.len()),
    ] {
        if len != n {
            return Err(Error::LengthMismatch {
                what: name,
                expected: n,
                actual: len,
            });
        }
    }
    if n == 0 {
        return Err(Error::Empty("forecast has no hourly samples"));
    }
    let mut times = Vec::with_capacity(n);
    for (i, s) in h.time.iter().enumerate() {
        let t = parse_timestamp(s).ok_or_else(|| Error::Schema(format!("bad time {s:?}")))?;
        if let Some(&prev) = times.last() {
            if t.signed_duration_since(prev).num_seconds() != 3600 {
                return Err(Error::Schema(format!("time[{i}] is not one hour after time[{}]", i - 1)));
            }
        }
        times.push(t);
    }
    if h.precipitation.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::Schema("negative precipitation".into()));
    }

    let lerp = |v: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(n * STEPS_PER_HOUR);
        for k in 0..n {
            let a = v[k];
            let b = v.get(k + 1).copied().unwrap_or(a);
            for j in 0..STEPS_PER_HOUR {
                out.push(a + (b - a) * j as f64 / STEPS_PER_HOUR as f64);
            }
        }
        out
    };
    let precip = h
        .precipitation
        .iter()
        .flat_map(|&p| std::iter::repeat_n(p / STEPS_PER_HOUR as f64, STEPS_PER_HOUR))
        .collect();
    let rh: Vec<f64> = lerp(&h.relative_humidity_2m)
        .into_iter()
        .map(|r| r.clamp(0.0, 100.0))
        .collect();
    let wind: Vec<f64> = lerp(&h.wind_speed_10m).into_iter().map(|w| w.max(0.0)).collect();
    WeatherSeries::new(
        TimeAxis::ten_minute(times[0], n * STEPS_PER_HOUR),
        precip,
        lerp(&h.temperature_2m),
        rh,
        wind,
    )
}

/// Parameters of the synthetic weather generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthWeatherConfig {
    pub t_mean_c: f64,
    pub t_amp_c: f64,
    pub t_peak_hour: f64,
    /// Poisson rate of rain events, per day.
    pub rain_rate_per_day: f64,
    pub rain_duration_mean_h: f64,
    /// Log-normal parameters of rain intensity in mm/h.
    pub rain_intensity_mu: f64,
    pub rain_intensity_sigma: f64,
    pub rh_mean_pct: f64,
    pub rh_sd_pct: f64,
    pub wind_mean_ms: f64,
    pub wind_sd_ms: f64,
    /// AR(1) coefficient for humidity and wind anomalies.
    pub ar_coef: f64,
    pub seed: u64,
}

impl Default for SynthWeatherConfig {
    fn default() -> Self {
        Self {
            t_mean_c: 12.0,
            t_amp_c: 6.0,
            t_peak_hour: 15.0,
            rain_rate_per_day: 0.15,
            rain_duration_mean_h: 4.0,
            rain_intensity_mu: 0.0,
            rain_intensity_sigma: 0.7,
            rh_mean_pct: 65.0,
            rh_sd_pct: 8.0,
            wind_mean_ms: 2.5,
            wind_sd_ms: 1.0,
            ar_coef: 0.98,
            seed: 0,
        }
    }
}

impl SynthWeatherConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(self.rain_rate_per_day >= 0.0) {
            return bad("rain_rate_per_day must be >= 0");
        }
        if !(self.t_amp_c >= 0.0 && self.rh_sd_pct >= 0.0 && self.wind_sd_ms >= 0.0) {
            return bad("amplitudes must be >= 0");
        }
        if !(self.rain_duration_mean_h > 0.0) {
            return bad("rain_duration_mean_h must be > 0");
        }
        if !(self.rain_intensity_sigma >= 0.0) || !self.rain_intensity_mu.is_finite() {
            return bad("rain intensity parameters invalid");
        }
        if !(0.0..1.0).contains(&self.ar_coef) {
            return bad("ar_coef must be in [0, 1)");
        }
        Ok(())
    }
}

/// Diurnal temperature, Poisson rain events and AR(1) humidity/wind on a ten-minute axis.
pub fn synth_weather(
    config: &SynthWeatherConfig,
    start: DateTime<Utc>,
    n_steps: usize,
) -> Result<WeatherSeries> {
    config.validate()?;
    let axis = TimeAxis::ten_minute(start, n_steps);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let temp: Vec<f64> = (0..n_steps)
        .map(|i| {
            let h = axis.hour_of_day(i);
            config.t_mean_c
                + config.t_amp_c
                    * (2.0 * std::f64::consts::PI * (h - config.t_peak_hour + 6.0) / 24.0).sin()
        })
        .collect();

    let mut precip = vec![0.0; n_steps];
    if config.rain_rate_per_day > 0.0 {
        let gap = Exp::new(config.rain_rate_per_day / 144.0).expect("positive rate");
        let dur = Exp::new(1.0 / (config.rain_duration_mean_h * STEPS_PER_HOUR as f64))
            .expect("positive duration");
        let intensity = LogNormal::new(config.rain_intensity_mu, config.rain_intensity_sigma)
            .expect("valid lognormal");
        let mut t = gap.sample(&mut rng);
        while (t as usize) < n_steps {
            let s = t as usize;
            let d = (dur.sample(&mut rng).round() as usize).max(1);
            let mm_per_step = intensity.sample(&mut rng) / STEPS_PER_HOUR as f64;
            for p in precip.iter_mut().skip(s).take(d) {
                *p += mm_per_step;
            }
            t += gap.sample(&mut rng);
        }
    }

    let ar = config.ar_coef;
    let innov = (1.0 - ar * ar).sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let (mut a_rh, mut a_w) = (0.0f64, 0.0f64);
    let mut rh = Vec::with_capacity(n_steps);
    let mut wind = Vec::with_capacity(n_steps);
    for &p in &precip {
        a_rh = ar * a_rh + innov * std_normal.sample(&mut rng);
        a_w = ar * a_w + innov * std_normal.sample(&mut rng);
        let wet = if p > 0.0 { 25.0 } else { 0.0 };
        rh.push((config.rh_mean_pct + config.rh_sd_pct * a_rh + wet).clamp(5.0, 100.0));
        wind.push((config.wind_mean_ms + config.wind_sd_ms * a_w).max(0.0));
    }
    WeatherSeries::new(axis, precip, temp, rh, wind)
}

/// Error model applied to true weather to produce a forecast clue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastNoise {
    pub temp_sd_c: f64,
    pub rh_sd_pct: f64,
    pub wind_sd_ms: f64,
    /// Log-scale sd of the per-event multiplicative precipitation error.
    pub precip_log_sd: f64,
    /// Rain events are shifted by up to this many steps either way.
    pub jitter_max_steps: usize,
    /// e-folding time of the temperature, humidity and wind errors, steps. Forecast errors
    /// drift slowly; 0 gives independent errors per step.
    pub error_corr_steps: f64,
}

impl Default for ForecastNoise {
    fn default() -> Self {
        Self {
            temp_sd_c: 1.0,
            rh_sd_pct: 5.0,
            wind_sd_ms: 0.5,
            precip_log_sd: 0.3,
            jitter_max_steps: 6,
            error_corr_steps: 72.0,
        }
    }
}

impl ForecastNoise {
    pub fn none() -> Self {
        Self {
            temp_sd_c: 0.0,
            rh_sd_pct: 0.0,
            wind_sd_ms: 0.0,
            precip_log_sd: 0.0,
            jitter_max_steps: 0,
            error_corr_steps: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.temp_sd_c, self.rh_sd_pct, self.wind_sd_ms, self.precip_log_sd, self.error_corr_steps]
            .iter()
            .any(|x| !(*x >= 0.0))
        {
            return Err(Error::InvalidParams("noise scales must be >= 0".into()));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).expect("sd >= 0").sample(rng)
}

/// Perturb a true weather series into a forecast clue. Deterministic per `seed`.
pub fn perturb_forecast(truth: &WeatherSeries, noise: &ForecastNoise, seed: u64) -> Result<WeatherSeries> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = truth.len();
    let mut out = truth.clone();
    // AR(1) errors with stationary sd equal to the configured scale.
    let rho = if noise.error_corr_steps > 0.0 { (-1.0 / noise.error_corr_steps).exp() } else { 0.0 };
    let innov = (1.0 - rho * rho).sqrt();
    let mut e = [0.0f64; 3];
    for i in 0..n {
        let sds = [noise.temp_sd_c, noise.rh_sd_pct, noise.wind_sd_ms];
        for (ek, sd) in e.iter_mut().zip(sds) {
            let z = gaussian(&mut rng, sd);
            *ek = if i == 0 { z } else { rho * *ek + innov * z };
        }
        out.temp_c[i] += e[0];
        out.rh_pct[i] = (out.rh_pct[i] + e[1]).clamp(0.0, 100.0);
        out.wind_ms[i] = (out.wind_ms[i] + e[2]).max(0.0);
    }

    if noise.precip_log_sd > 0.0 || noise.jitter_max_steps > 0 {
        let mut precip = vec![0.0; n];
        let mut i = 0;
        while i < n {
            if truth.precip_mm[i] <= 0.0 {
                i += 1;
                continue;
            }
            let s = i;
            while i < n && truth.precip_mm[i] > 0.0 {
                i += 1;
            }
            let factor = gaussian(&mut rng, noise.precip_log_sd).exp();
            let j = noise.jitter_max_steps as i64;
            let shift = if j > 0 { rng.random_range(-j..=j) } else { 0 };
            for k in s..i {
                let dst = k as i64 + shift;
                if (0..n as i64).contains(&dst) {
                    precip[dst as usize] += truth.precip_mm[k] * factor;
                }
            }
        }
        out.precip_mm = precip.into_iter().map(|p: f64| p.max(0.0)).collect();
    }
    Ok(out)
}
