//! Periodicity analysis: amplitude spectra, exclusion of frequencies induced by the flooding
//! schedule itself, and folding of a series into one row per period.

use std::collections::BTreeSet;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default share of the peak flood amplitude above which a bin counts as action-triggered.
pub const DEFAULT_AMP_RATIO: f64 = 0.2;

/// Periods must clear this multiple of the median amplitude.
pub const NOISE_FLOOR_FACTOR: f64 = 3.0;

/// Chance that pure noise puts any bin above the floor.
pub const FALSE_ALARM_RATE: f64 = 0.01;

/// Bins this far below the peak are round-off, not signal.
const ROUNDOFF_RATIO: f64 = 1e-9;

/// One-sided amplitude spectrum without the DC bin. Entry `i` is FFT bin `i + 1`, at
/// frequency `(i + 1) / n` cycles per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub n: usize,
}

impl Spectrum {
    pub fn bins(&self) -> impl Iterator<Item = usize> {
        1..=self.amplitudes.len()
    }

    pub fn amplitude(&self, bin: usize) -> f64 {
        self.amplitudes[bin - 1]
    }

    pub fn period_of(&self, bin: usize) -> usize {
        (self.n as f64 / bin as f64).round() as usize
    }
}

pub fn periodogram(series: &[f64]) -> Result<Spectrum> {
    let n = series.len();
    if n < 4 {
        return Err(Error::LengthMismatch {
            what: "periodogram needs at least 4 samples",
            expected: 4,
            actual: n,
        });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let amplitudes = (1..=half)
        .map(|k| {
            let scale = if 2 * k == n { 1.0 } else { 2.0 };
            scale * buf[k].norm() / n as f64
        })
        .collect();
    let frequencies = (1..=half).map(|k| k as f64 / n as f64).collect();
    Ok(Spectrum {
        frequencies,
        amplitudes,
        n,
    })
}

/// Bins of the flood spectrum reaching `amp_ratio` of its peak, widened by one neighbour on
/// each side. Empty when the schedule never changes.
pub fn action_frequency_bins(flood: &[f64], amp_ratio: f64) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let Ok(spec) = periodogram(flood) else {
        return out;
    };
    let peak = spec.amplitudes.iter().copied().fold(0.0, f64::max);
    if peak <= 1e-12 {
        return out;
    }
    let last = spec.amplitudes.len();
    for bin in spec.bins() {
        if spec.amplitude(bin) >= amp_ratio * peak {
            out.insert(bin);
            if bin > 1 {
                out.insert(bin - 1);
            }
            if bin < last {
                out.insert(bin + 1);
            }
        }
    }
    out
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 0 {
        0.5 * (s[m - 1] + s[m])
    } else {
        s[m]
    }
}

/// Amplitude a bin must reach to count as a period.
///
/// At least three times the median amplitude. For Gaussian noise the amplitudes are Rayleigh
/// distributed, so the tail beyond `c · median` is `2^-(c²)`; `c` is raised until the expected
/// number of noise bins over the floor is `FALSE_ALARM_RATE`.
pub fn noise_floor(spec: &Spectrum) -> f64 {
    let m = spec.amplitudes.len().max(1) as f64;
    let c = NOISE_FLOOR_FACTOR.max((m / FALSE_ALARM_RATE).log2().sqrt());
    let peak = spec.amplitudes.iter().copied().fold(0.0, f64::max);
    (c * median(&spec.amplitudes)).max(ROUNDOFF_RATIO * peak)
}

/// Up to `k` distinct periods (in steps) from the strongest non-excluded bins, strongest
/// first. Bins under [`noise_floor`] are ignored.
pub fn dominant_periods(spec: &Spectrum, k: usize, excluded: &BTreeSet<usize>) -> Vec<usize> {
    if spec.amplitudes.is_empty() || k == 0 {
        return Vec::new();
    }
    let floor = noise_floor(spec);
    let mut bins: Vec<usize> = spec
        .bins()
        .filter(|b| !excluded.contains(b))
        .filter(|&b| spec.amplitude(b) > 0.0 && spec.amplitude(b) >= floor)
        .collect();
    bins.sort_by(|&a, &b| spec.amplitude(b).total_cmp(&spec.amplitude(a)).then(a.cmp(&b)));
    let mut out = Vec::new();
    for b in bins {
        let p = spec.period_of(b);
        if !out.contains(&p) {
            out.push(p);
            if out.len() == k {
                break;
            }
        }
    }
    out
}

/// A series laid out one period per row, oldest row first, right-aligned so the newest sample
/// sits in the last cell. Leading cells of a partial first row repeat the first sample and are
/// flagged in `mask`.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedSeries {
    pub period: usize,
    pub rows: usize,
    /// Row-major `rows × period`.
    pub data: Vec<f64>,
    pub mask: Vec<bool>,
}

impl FoldedSeries {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.period + col]
    }

    pub fn is_pad(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.period + col]
    }

    pub fn padded_cells(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Non-padded cells in time order.
    pub fn flatten(&self) -> Vec<f64> {
        self.data
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| !m)
            .map(|(&x, _)| x)
            .collect()
    }
}

pub fn fold_2d(series: &[f64], period: usize) -> Result<FoldedSeries> {
    let n = series.len();
    if period < 2 {
        return Err(Error::InvalidParams(format!("period must be >= 2, got {period}")));
    }
    if period > n {
        return Err(Error::LengthMismatch {
            what: "period longer than series",
            expected: n,
            actual: period,
        });
    }
    let rows = n.div_ceil(period);
    let pad = rows * period - n;
    let mut data = Vec::with_capacity(rows * period);
    data.extend(std::iter::repeat_n(series[0], pad));
    data.extend_from_slice(series);
    let mut mask = vec![false; rows * period];
    mask[..pad].iter_mut().for_each(|m| *m = true);
    Ok(FoldedSeries {
        period,
        rows,
        data,
        mask,
    })
}

/// Per-phase level and slope of a folded series.
///
/// `profile[φ]` is the level at phase `φ` anchored to the last row, so the forecast for phase
/// `φ` that lies `r` rows after the last row is `profile[φ] + trend[φ] * r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalProfile {
    pub profile: Vec<f64>,
    pub trend: Vec<f64>,
}

impl SeasonalProfile {
    pub fn period(&self) -> usize {
        self.profile.len()
    }

    pub fn predict(&self, phase: usize, rows_ahead: f64) -> f64 {
        self.profile[phase] + self.trend[phase] * rows_ahead
    }

    /// Forecast for the `h`-th step (1-based) after the end of the folded series.
    pub fn predict_ahead(&self, h: usize) -> f64 {
        let p = self.period();
        let phase = (h - 1) % p;
        let rows_ahead = ((h - 1) / p + 1) as f64;
        self.predict(phase, rows_ahead)
    }

    /// In-sample fit for cell `(row, col)` of a series with `rows` rows.
    pub fn fitted(&self, rows: usize, row: usize, col: usize) -> f64 {
        self.predict(col, row as f64 - (rows - 1) as f64)
    }
}

/// Recency-weighted per-phase mean and least-squares per-phase slope. Row weights halve every
/// `recency_halflife` rows counted back from the newest; padded cells are ignored; the slope is
/// zero for phases with fewer than three observed rows.
pub fn seasonal_profile(folded: &FoldedSeries, recency_halflife: f64) -> SeasonalProfile {
    let p = folded.period;
    let rows = folded.rows;
    let last = (rows - 1) as f64;
    let hl = if recency_halflife > 0.0 {
        recency_halflife
    } else {
        f64::INFINITY
    };
    let weight = |r: usize| 0.5f64.powf((last - r as f64) / hl);

    let mut profile = vec![0.0; p];
    let mut trend = vec![0.0; p];
    for col in 0..p {
        let obs: Vec<(f64, f64)> = (0..rows)
            .filter(|&r| !folded.is_pad(r, col))
            .map(|r| (r as f64, folded.get(r, col)))
            .collect();
        let (mut sw, mut swx, mut swr) = (0.0, 0.0, 0.0);
        for &(r, x) in &obs {
            let w = weight(r as usize);
            sw += w;
            swx += w * x;
            swr += w * r;
        }
        let wmean = swx / sw;
        let wcenter = swr / sw;

        let slope = if obs.len() >= 3 {
            let m = obs.len() as f64;
            let rbar = obs.iter().map(|o| o.0).sum::<f64>() / m;
            let xbar = obs.iter().map(|o| o.1).sum::<f64>() / m;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for &(r, x) in &obs {
                sxy += (r - rbar) * (x - xbar);
                sxx += (r - rbar) * (r - rbar);
            }
            sxy / sxx
        } else {
            0.0
        };
        profile[col] = wmean + slope * (last - wcenter);
        trend[col] = slope;
    }
    SeasonalProfile { profile, trend }
}
