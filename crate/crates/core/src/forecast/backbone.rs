//! Preliminary multivariate forecaster: per-variate seasonal profiles plus a ridge map from a
//! downsampled window of every variate's deseasonalized residual to each variate's future
//! residual.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ridge;
use crate::error::{Error, Result, Violation, ViolationKind};
use crate::spectral::{action_frequency_bins, dominant_periods, fold_2d, periodogram, seasonal_profile};
use crate::types::{HistoryWindow, TimeAxis, Variate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackboneConfig {
    /// Input window `T_in`, steps.
    pub input_len: usize,
    /// Forecast horizon `S`, steps.
    pub horizon: usize,
    /// Lag-window and target sampling stride, steps.
    pub downsample: usize,
    pub lambda: f64,
    /// Periods kept per variate.
    pub max_periods: usize,
    pub amp_ratio: f64,
    /// Recency half-life of the seasonal profile, in periods.
    pub recency_halflife: f64,
    /// Extrapolate per-phase slopes into the forecast. Off by default: slopes estimated from a
    /// few dozen rows are noisy and the ridge stage absorbs slow drift.
    pub extrapolate_trend: bool,
    /// Spacing of training origins, steps.
    pub train_stride: usize,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self {
            input_len: 720,
            horizon: 720,
            downsample: 6,
            lambda: 1.0,
            max_periods: 2,
            amp_ratio: crate::spectral::DEFAULT_AMP_RATIO,
            recency_halflife: 7.0,
            extrapolate_trend: false,
            train_stride: 6,
        }
    }
}

impl BackboneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(format!("backbone: {m}")));
        if self.downsample == 0 || self.input_len == 0 || self.horizon == 0 || self.train_stride == 0 {
            return bad("input_len, horizon, downsample and train_stride must be positive");
        }
        if self.input_len % self.downsample != 0 || self.horizon % self.downsample != 0 {
            return bad("downsample must divide input_len and horizon");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be positive");
        }
        if !(self.amp_ratio > 0.0 && self.amp_ratio <= 1.0) {
            return bad("amp_ratio must be in (0, 1]");
        }
        if !(self.recency_halflife > 0.0) {
            return bad("recency_halflife must be positive");
        }
        Ok(())
    }

    fn lags(&self) -> usize {
        self.input_len / self.downsample
    }

    fn knots(&self) -> usize {
        self.horizon / self.downsample
    }

    pub fn min_history(&self) -> usize {
        self.input_len + self.horizon
    }
}

/// Seasonal profile of one period, indexed by absolute phase. `anchor_epoch` is the epoch
/// step of the last cell of the folded training series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalComponent {
    pub period: usize,
    pub anchor_epoch: i64,
    pub profile: Vec<f64>,
    pub trend: Vec<f64>,
}

impl SeasonalComponent {
    pub fn value(&self, epoch: i64, with_trend: bool) -> f64 {
        let p = self.period as i64;
        let d = epoch - self.anchor_epoch + p - 1;
        let col = d.rem_euclid(p) as usize;
        if with_trend {
            self.profile[col] + self.trend[col] * d.div_euclid(p) as f64
        } else {
            self.profile[col]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneModel {
    pub config: BackboneConfig,
    pub step_secs: i64,
    /// Seasonal components per variate, in [`Variate::ALL`] order.
    pub seasonal: Vec<Vec<SeasonalComponent>>,
    pub feature_mean: Vec<f64>,
    /// Multiplier that standardizes each feature; 0 for features constant in training.
    pub feature_scale: Vec<f64>,
    pub target_mean: Vec<f64>,
    /// Row-major `features × targets`.
    pub coef: Vec<f64>,
}

impl BackboneModel {
    pub fn periods(&self, v: Variate) -> Vec<usize> {
        self.seasonal[v.index()].iter().map(|c| c.period).collect()
    }

    pub fn seasonal_value(&self, v: Variate, epoch: i64) -> f64 {
        self.seasonal[v.index()]
            .iter()
            .map(|c| c.value(epoch, self.config.extrapolate_trend))
            .sum()
    }

    pub fn n_features(&self) -> usize {
        Variate::COUNT * self.config.lags()
    }

    pub fn n_targets(&self) -> usize {
        Variate::COUNT * self.config.knots()
    }

    /// Shape and finiteness checks, used after deserializing.
    pub fn check(&self) -> Result<()> {
        self.config.validate()?;
        let (d, m) = (self.n_features(), self.n_targets());
        let bad = |m: String| Err(Error::Format(m));
        if self.seasonal.len() != Variate::COUNT {
            return bad("seasonal components must cover every variate".into());
        }
        for c in self.seasonal.iter().flatten() {
            if c.period < 2 || c.profile.len() != c.period || c.trend.len() != c.period {
                return bad(format!("malformed seasonal component of period {}", c.period));
            }
        }
        if self.step_secs <= 0 {
            return bad("step must be positive".into());
        }
        if self.feature_mean.len() != d
            || self.feature_scale.len() != d
            || self.target_mean.len() != m
            || self.coef.len() != d * m
        {
            return bad("coefficient dimensions do not match the config".into());
        }
        let all = self
            .seasonal
            .iter()
            .flatten()
            .flat_map(|c| c.profile.iter().chain(&c.trend))
            .chain(&self.feature_mean)
            .chain(&self.feature_scale)
            .chain(&self.target_mean)
            .chain(&self.coef);
        for x in all {
            if !x.is_finite() {
                return bad("non-finite coefficient".into());
            }
        }
        Ok(())
    }

    fn residual(&self, frame: &HistoryWindow, v: Variate, i: usize) -> f64 {
        frame.column(v)[i] - self.seasonal_value(v, frame.axis().epoch_index(i))
    }

    fn features(&self, frame: &HistoryWindow, end: usize, out: &mut [f64]) {
        let (lags, ds) = (self.config.lags(), self.config.downsample);
        for v in Variate::ALL {
            for j in 0..lags {
                out[v.index() * lags + j] = self.residual(frame, v, end - 1 - j * ds);
            }
        }
    }

    /// `S`-step forecast of every variate following `recent`, clamped to each domain.
    pub fn predict(&self, recent: &HistoryWindow) -> Result<HistoryWindow> {
        let c = &self.config;
        let n = recent.len();
        if n < c.input_len {
            return Err(Error::InsufficientHistory {
                need: c.input_len,
                have: n,
            });
        }
        if recent.axis().step_secs() != self.step_secs {
            return Err(Error::InvalidAxis(format!(
                "model step is {} s, history step is {} s",
                self.step_secs,
                recent.axis().step_secs()
            )));
        }
        let window = recent.tail(c.input_len)?;
        let mut bad = Vec::new();
        for v in Variate::ALL {
            for (i, x) in window.column(v).iter().enumerate() {
                if !x.is_finite() {
                    bad.push(Violation {
                        column: v.column_name(),
                        index: n - c.input_len + i,
                        kind: ViolationKind::NotFinite,
                    });
                }
            }
        }
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }

        let (d, m, knots, ds) = (self.n_features(), self.n_targets(), c.knots(), c.downsample);
        let mut f = vec![0.0; d];
        self.features(&window, c.input_len, &mut f);
        let z: Vec<f64> = f
            .iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((x, mu), s)| (x - mu) * s)
            .collect();
        let mut y = self.target_mean.clone();
        for (i, zi) in z.iter().enumerate() {
            if *zi != 0.0 {
                let row = &self.coef[i * m..(i + 1) * m];
                for (yk, b) in y.iter_mut().zip(row) {
                    *yk += zi * b;
                }
            }
        }

        let last = c.input_len - 1;
        let last_epoch = window.axis().epoch_index(last);
        let axis = recent.axis().following(c.horizon);
        let mut columns: [Vec<f64>; Variate::COUNT] = Default::default();
        for v in Variate::ALL {
            let anchor = self.residual(&window, v, last);
            let knot = |k: usize| {
                if k == 0 {
                    anchor
                } else {
                    y[v.index() * knots + k - 1]
                }
            };
            columns[v.index()] = (1..=c.horizon)
                .map(|h| {
                    let (lo, rem) = (h / ds, h % ds);
                    let r = if rem == 0 {
                        knot(lo)
                    } else {
                        let (a, b) = (knot(lo), knot(lo + 1));
                        a + (b - a) * rem as f64 / ds as f64
                    };
                    v.clamp(r + self.seasonal_value(v, last_epoch + h as i64))
                })
                .collect();
        }
        HistoryWindow::new(axis, columns)
    }
}

/// Fit seasonal profiles on the full history, then the residual ridge map on rolling windows.
/// The history must be free of missing values.
pub fn fit_backbone(history: &HistoryWindow, config: &BackboneConfig) -> Result<BackboneModel> {
    config.validate()?;
    let n = history.len();
    if n < config.min_history() {
        return Err(Error::InsufficientHistory {
            need: config.min_history(),
            have: n,
        });
    }
    let axis: &TimeAxis = history.axis();
    let excluded = action_frequency_bins(history.column(Variate::Flood), config.amp_ratio);

    let mut model = BackboneModel {
        config: config.clone(),
        step_secs: axis.step_secs(),
        seasonal: Vec::with_capacity(Variate::COUNT),
        feature_mean: Vec::new(),
        feature_scale: Vec::new(),
        target_mean: Vec::new(),
        coef: Vec::new(),
    };
    let anchor_epoch = axis.epoch_index(n - 1);
    for v in Variate::ALL {
        let col = history.column(v);
        if let Some(i) = col.iter().position(|x| !x.is_finite()) {
            return Err(Error::Validation(vec![Violation {
                column: v.column_name(),
                index: i,
                kind: ViolationKind::NotFinite,
            }]));
        }
        let spec = periodogram(col)?;
        let periods = dominant_periods(&spec, config.max_periods, &excluded);
        let mut resid = col.to_vec();
        let mut comps = Vec::new();
        for p in periods.into_iter().filter(|&p| p >= 2 && 3 * p <= n) {
            let sp = seasonal_profile(&fold_2d(&resid, p)?, config.recency_halflife);
            let comp = SeasonalComponent {
                period: p,
                anchor_epoch,
                profile: sp.profile,
                trend: sp.trend,
            };
            for (i, r) in resid.iter_mut().enumerate() {
                *r -= comp.value(axis.epoch_index(i), config.extrapolate_trend);
            }
            comps.push(comp);
        }
        model.seasonal.push(comps);
    }

    let (d, m, knots, ds) = (model.n_features(), model.n_targets(), config.knots(), config.downsample);
    let origins: Vec<usize> = (config.input_len..=n - config.horizon)
        .step_by(config.train_stride)
        .collect();
    let rows = origins.len();
    let mut x = DMatrix::<f64>::zeros(rows, d);
    let mut y = DMatrix::<f64>::zeros(rows, m);
    let mut f = vec![0.0; d];
    for (r, &o) in origins.iter().enumerate() {
        model.features(history, o, &mut f);
        for (i, fi) in f.iter().enumerate() {
            x[(r, i)] = *fi;
        }
        for v in Variate::ALL {
            for k in 1..=knots {
                y[(r, v.index() * knots + k - 1)] = model.residual(history, v, o - 1 + k * ds);
            }
        }
    }

    for i in 0..d {
        let mut col = x.column_mut(i);
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / rows as f64;
        let sd = var.sqrt();
        let scale = if sd > 1e-9 * mean.abs().max(1.0) { 1.0 / sd } else { 0.0 };
        col.apply(|v| *v = (*v - mean) * scale);
        model.feature_mean.push(mean);
        model.feature_scale.push(scale);
    }
    for k in 0..m {
        let mut col = y.column_mut(k);
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        model.target_mean.push(mean);
    }
    let b = ridge::solve(&x, &y, config.lambda)?;
    model.coef = (0..d).flat_map(|i| (0..m).map(move |k| (i, k))).map(|ik| b[ik]).collect();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use std::f64::consts::PI;

    fn frame(n: usize, f: impl Fn(Variate, usize) -> f64) -> HistoryWindow {
        let axis = TimeAxis::ten_minute(Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(), n);
        let cols = Variate::ALL.map(|v| (0..n).map(|i| f(v, i)).collect());
        HistoryWindow::new(axis, cols).unwrap()
    }

    fn periodic(v: Variate, i: usize) -> f64 {
        let ph = 2.0 * PI * (i % 144) as f64 / 144.0;
        match v {
            Variate::Oxygen => 18.0 + 1.5 * ph.sin() + 0.3 * (2.0 * ph).cos(),
            Variate::Swc => 0.3 + 0.01 * ph.cos(),
            Variate::Flood => 0.0,
            Variate::Precip => 0.0,
            Variate::Temp => 12.0 + 6.0 * ph.sin(),
            Variate::Rh => 60.0 - 10.0 * ph.sin(),
            Variate::Wind => 2.0 + (3.0 * ph).sin().abs(),
        }
    }

    fn small() -> BackboneConfig {
        BackboneConfig {
            input_len: 288,
            horizon: 144,
            ..Default::default()
        }
    }

    #[test]
    fn exact_periodic_held_out() {
        let full = frame(144 * 35, periodic);
        let train = full.slice(0, 144 * 25).unwrap();
        let model = fit_backbone(&train, &BackboneConfig::default()).unwrap();
        assert_eq!(model.periods(Variate::Temp)[0], 144);
        let recent = full.slice(144 * 25, 720).unwrap();
        let fc = model.predict(&recent).unwrap();
        let truth = full.slice(144 * 25 + 720, 720).unwrap();
        for v in Variate::ALL {
            let mse = fc
                .column(v)
                .iter()
                .zip(truth.column(v))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / 720.0;
            assert!(mse <= 1e-6, "{v}: {mse}");
        }
        assert!(fc.column(Variate::Flood).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_history() {
        let h = frame(2000, |v, _| if v == Variate::Flood { 0.0 } else { 7.5 });
        let m = fit_backbone(&h, &small()).unwrap();
        let fc = m.predict(&h).unwrap();
        assert!(fc.column(Variate::Temp).iter().all(|&x| (x - 7.5).abs() < 1e-12));
        assert!(fc.column(Variate::Flood).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn huge_lambda_is_seasonal_plus_mean() {
        let h = frame(2880, |v, i| periodic(v, i) + 0.2 * ((i * 7919) % 13) as f64 / 13.0);
        let cfg = BackboneConfig {
            lambda: 1e9,
            ..small()
        };
        let m = fit_backbone(&h, &cfg).unwrap();
        assert!(m.coef.iter().all(|b| b.abs() < 1e-5));
        let fc = m.predict(&h).unwrap();
        let last = h.axis().epoch_index(h.len() - 1);
        let knots = cfg.horizon / cfg.downsample;
        for k in 1..=knots {
            let hstep = k * cfg.downsample;
            let v = Variate::Temp;
            let expect = m.seasonal_value(v, last + hstep as i64) + m.target_mean[v.index() * knots + k - 1];
            assert!((fc.column(v)[hstep - 1] - expect).abs() < 1e-2);
        }
    }

    #[test]
    fn rejects_short_inputs() {
        let h = frame(300, periodic);
        assert!(matches!(
            fit_backbone(&h, &small()),
            Err(Error::InsufficientHistory { .. })
        ));
        let m = fit_backbone(&frame(1000, periodic), &small()).unwrap();
        assert!(m.predict(&h.slice(0, 100).unwrap()).is_err());
        m.check().unwrap();
    }
}
