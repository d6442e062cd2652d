//! Two-stage oxygen forecaster: a preliminary multivariate forecast from history alone, then
//! causal calibration against the weather forecast and a flooding proposal.

mod backbone;
mod causal;
mod persist;
mod ridge;

pub use backbone::{fit_backbone, BackboneConfig, BackboneModel, SeasonalComponent};
pub use causal::{
    calibrate, convolve_into, fit_causal, fit_target, tier, tier_edges, CausalConfig, CausalEdgeModel,
    CausalModel, Deltas, ForecastResult, TARGETS,
};
pub use persist::{load, load_from, save, save_to, FORMAT_VERSION, MAGIC};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{metrics_values, ForecastMetrics};
use crate::types::{ExogenousClues, HistoryWindow, Variate};
use crate::validate::validate_frame;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub backbone: BackboneConfig,
    pub causal: CausalConfig,
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        self.backbone.validate()?;
        self.causal.validate()
    }

    /// Shortest history that yields `min_windows` backtests.
    pub fn min_history(&self) -> usize {
        self.backbone.min_history() + (self.causal.min_windows - 1) * self.causal.backtest_stride
    }
}

/// A fitted forecaster. Immutable; share freely across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Models {
    pub backbone: BackboneModel,
    pub causal: CausalModel,
}

impl Models {
    pub fn config(&self) -> ForecastConfig {
        ForecastConfig {
            backbone: self.backbone.config.clone(),
            causal: self.causal.config.clone(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.backbone.config.horizon
    }

    pub fn input_len(&self) -> usize {
        self.backbone.config.input_len
    }

    pub fn check(&self) -> Result<()> {
        self.backbone.check()?;
        self.causal.check()?;
        for (s, t) in tier_edges() {
            if self.causal.edge(s, t).is_none() {
                return Err(Error::MissingEdge {
                    source_var: s.column_name(),
                    target: t.column_name(),
                });
            }
        }
        Ok(())
    }

    pub fn predict_backbone(&self, recent: &HistoryWindow) -> Result<HistoryWindow> {
        self.backbone.predict(recent)
    }
}

/// Deviations of the history from backbone forecasts issued at rolling origins.
pub fn backtest_deltas(
    backbone: &BackboneModel,
    history: &HistoryWindow,
    stride: usize,
) -> Result<Vec<Deltas>> {
    let (t_in, s) = (backbone.config.input_len, backbone.config.horizon);
    let n = history.len();
    if n < t_in + s {
        return Err(Error::InsufficientHistory {
            need: t_in + s,
            have: n,
        });
    }
    (t_in..=n - s)
        .step_by(stride)
        .map(|o| {
            let prelim = backbone.predict(&history.slice(o - t_in, t_in)?)?;
            let mut d: Deltas = Default::default();
            for v in Variate::ALL {
                d[v.index()] = history.column(v)[o..o + s]
                    .iter()
                    .zip(prelim.column(v))
                    .map(|(a, p)| a - p)
                    .collect();
            }
            Ok(d)
        })
        .collect()
}

/// Fit both stages on a history. Isolated missing samples are repaired first; anything worse is
/// a validation error.
pub fn fit(history: &HistoryWindow, config: &ForecastConfig) -> Result<Models> {
    config.validate()?;
    let frame = validate_frame(history)?.frame;
    let need = config.min_history();
    if frame.len() < need {
        return Err(Error::InsufficientHistory {
            need,
            have: frame.len(),
        });
    }
    let backbone = fit_backbone(&frame, &config.backbone)?;
    let windows = backtest_deltas(&backbone, &frame, config.causal.backtest_stride)?;
    let causal = fit_causal(&windows, &config.causal)?;
    Ok(Models { backbone, causal })
}

/// Backbone forecast after `recent`, calibrated against `clues`.
pub fn forecast(models: &Models, recent: &HistoryWindow, clues: &ExogenousClues) -> Result<ForecastResult> {
    let prelim = models.backbone.predict(recent)?;
    calibrate(&prelim, clues, &models.causal)
}

/// Full re-fit on `history` extended by `appended`, with the configuration of `models`.
pub fn refit(models: &Models, history: &HistoryWindow, appended: &HistoryWindow) -> Result<Models> {
    let appended = if appended.is_empty() {
        appended.clone()
    } else {
        validate_frame(appended)?.frame
    };
    fit(&history.append(&appended)?, &models.config())
}

/// Oxygen forecast errors at one rolling origin, without and with calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestWindow {
    pub origin: usize,
    pub preliminary: ForecastMetrics,
    pub calibrated: ForecastMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub windows: Vec<BacktestWindow>,
    /// Means over windows.
    pub preliminary: ForecastMetrics,
    pub calibrated: ForecastMetrics,
    /// Share of windows where calibrated MSE is at most the preliminary MSE.
    pub calibrated_not_worse: f64,
}

/// Rolling-origin backtest on `history` with the realized exogenous columns as clues.
pub fn backtest(models: &Models, history: &HistoryWindow, stride: usize, max_windows: Option<usize>) -> Result<BacktestReport> {
    if stride == 0 {
        return Err(Error::InvalidParams("backtest stride must be >= 1".into()));
    }
    let (t_in, h) = (models.input_len(), models.horizon());
    let n = history.len();
    if n < t_in + h {
        return Err(Error::InsufficientHistory { need: t_in + h, have: n });
    }
    let origins: Vec<usize> = (t_in..=n - h).step_by(stride).collect();
    let skip = max_windows.map_or(0, |m| origins.len().saturating_sub(m));
    let step_hours = history.axis().step_hours();
    let mut windows = Vec::new();
    for &o in &origins[skip..] {
        let future = history.slice(o, h)?;
        let col = |v: Variate| future.column(v).to_vec();
        let clues = ExogenousClues::new(
            *future.axis(),
            col(Variate::Flood),
            col(Variate::Precip),
            col(Variate::Temp),
            col(Variate::Rh),
            col(Variate::Wind),
        )?;
        let r = forecast(models, &history.slice(o - t_in, t_in)?, &clues)?;
        let actual = future.column(Variate::Oxygen);
        windows.push(BacktestWindow {
            origin: o,
            preliminary: metrics_values(r.preliminary.column(Variate::Oxygen), actual, step_hours)?,
            calibrated: metrics_values(r.calibrated_oxygen.values(), actual, step_hours)?,
        });
    }
    let mean = |f: &dyn Fn(&BacktestWindow) -> ForecastMetrics| {
        let k = windows.len() as f64;
        let s = windows.iter().map(f).fold([0.0; 4], |a, m| {
            [a[0] + m.mse, a[1] + m.mae, a[2] + m.pte_hours, a[3] + m.pve]
        });
        ForecastMetrics { mse: s[0] / k, mae: s[1] / k, pte_hours: s[2] / k, pve: s[3] / k }
    };
    let not_worse = windows.iter().filter(|w| w.calibrated.mse <= w.preliminary.mse).count();
    Ok(BacktestReport {
        preliminary: mean(&|w| w.preliminary),
        calibrated: mean(&|w| w.calibrated),
        calibrated_not_worse: not_worse as f64 / windows.len() as f64,
        windows,
    })
}
