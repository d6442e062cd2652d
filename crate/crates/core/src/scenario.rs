//! Seeded simulation experiments: a training period under a randomized flooding policy, a
//! forecaster fitted to its sensor history, then one season per controller under the same
//! true weather.

use chrono::{DateTime, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{self, ForecastConfig, Models};
use crate::mpc::{
    mix, run_closed_loop, Controller, LearnedForecaster, MpcConfig, SeasonOptions, SeasonReport,
    SimulatorForecaster, WeeklySchedule,
};
use crate::sim::{observed_history, simulate_actions, SimParams, SimState};
use crate::types::HistoryWindow;
use crate::weather::{synth_weather, ForecastNoise, SynthWeatherConfig, WeatherSeries};

const STEPS_PER_DAY: usize = 144;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Learned forecaster.
    Mpc,
    /// Simulator rollouts from the true state; an upper reference.
    Oracle,
    Weekly,
    Never,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Mpc => "mpc",
            ControllerKind::Oracle => "oracle",
            ControllerKind::Weekly => "weekly",
            ControllerKind::Never => "never",
        }
    }
}

/// Flooding during the training period: alternating idle and flood runs of uniformly random
/// length, so the forecaster sees the valve at many phases and durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingPolicy {
    pub min_idle_steps: usize,
    pub max_idle_steps: usize,
    pub min_flood_steps: usize,
    pub max_flood_steps: usize,
}

impl Default for TrainingPolicy {
    fn default() -> Self {
        Self {
            min_idle_steps: 144,
            max_idle_steps: 720,
            min_flood_steps: 36,
            max_flood_steps: 144,
        }
    }
}

impl TrainingPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.min_idle_steps == 0
            || self.min_flood_steps == 0
            || self.min_idle_steps > self.max_idle_steps
            || self.min_flood_steps > self.max_flood_steps
        {
            return Err(Error::InvalidParams(format!("invalid training policy {self:?}")));
        }
        Ok(())
    }

    /// Valve actions for `n` steps, starting idle.
    pub fn actions(&self, n: usize, seed: u64) -> Vec<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let mut flooding = false;
        while out.len() < n {
            let len = if flooding {
                rng.random_range(self.min_flood_steps..=self.max_flood_steps)
            } else {
                rng.random_range(self.min_idle_steps..=self.max_idle_steps)
            };
            out.extend(std::iter::repeat_n(flooding, len.min(n - out.len())));
            flooding = !flooding;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub season_start: DateTime<Utc>,
    pub season_days: usize,
    pub training_days: usize,
    pub controllers: Vec<ControllerKind>,
    pub sim: SimParams,
    /// Weather generator; its own seed is replaced by one derived from `seed`.
    pub weather: SynthWeatherConfig,
    pub noise: ForecastNoise,
    pub clue_refresh: usize,
    pub training: TrainingPolicy,
    pub forecast: ForecastConfig,
    pub mpc: MpcConfig,
    pub weekly: WeeklySchedule,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            season_start: Utc.with_ymd_and_hms(2024, 2, 28, 0, 0, 0).unwrap(),
            season_days: 38,
            training_days: 60,
            controllers: vec![ControllerKind::Mpc, ControllerKind::Weekly, ControllerKind::Never],
            sim: SimParams::default(),
            weather: SynthWeatherConfig::default(),
            noise: ForecastNoise::default(),
            clue_refresh: 36,
            training: TrainingPolicy::default(),
            forecast: ForecastConfig::default(),
            // Hourly re-planning keeps a default season to about a minute on one core.
            mpc: MpcConfig {
                replan_every: 6,
                ..Default::default()
            },
            weekly: WeeklySchedule::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Format(format!("scenario: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.season_days == 0 {
            return Err(Error::InvalidParams("season_days must be >= 1".into()));
        }
        if self.controllers.is_empty() {
            return Err(Error::InvalidParams("no controllers listed".into()));
        }
        if self.clue_refresh == 0 {
            return Err(Error::InvalidParams("clue_refresh must be >= 1".into()));
        }
        self.sim.validate()?;
        self.weather.validate()?;
        self.noise.validate()?;
        self.training.validate()?;
        self.weekly.validate()?;
        if self.controllers.contains(&ControllerKind::Mpc) || self.controllers.contains(&ControllerKind::Oracle) {
            self.mpc.validate()?;
            if self.season_steps() < self.mpc.horizon() {
                return Err(Error::InvalidParams("season is shorter than the planning horizon".into()));
            }
        }
        if self.controllers.contains(&ControllerKind::Mpc) {
            self.forecast.validate()?;
            if self.mpc.horizon() != self.forecast.backbone.horizon {
                return Err(Error::LengthMismatch {
                    what: "forecast horizon vs plan horizon",
                    expected: self.mpc.horizon(),
                    actual: self.forecast.backbone.horizon,
                });
            }
            if self.training_steps() < self.forecast.min_history() {
                return Err(Error::InsufficientHistory {
                    need: self.forecast.min_history(),
                    have: self.training_steps(),
                });
            }
        }
        Ok(())
    }

    pub fn season_steps(&self) -> usize {
        self.season_days * STEPS_PER_DAY
    }

    pub fn training_steps(&self) -> usize {
        self.training_days * STEPS_PER_DAY
    }

    pub fn training_start(&self) -> DateTime<Utc> {
        self.season_start - chrono::Duration::days(self.training_days as i64)
    }

    fn seed_for(&self, stream: u64) -> u64 {
        mix(self.seed, stream)
    }
}

/// True weather from the start of training to one planning horizon past the season.
pub fn scenario_weather(config: &ScenarioConfig) -> Result<WeatherSeries> {
    let weather = SynthWeatherConfig {
        seed: config.seed_for(1),
        ..config.weather.clone()
    };
    let n = config.training_steps() + config.season_steps() + config.mpc.horizon();
    synth_weather(&weather, config.training_start(), n)
}

/// Sensor history of the training period and the field state at its end.
pub fn training_history(config: &ScenarioConfig, weather: &WeatherSeries) -> Result<(HistoryWindow, SimState)> {
    let n = config.training_steps();
    let start = SimState::at_field_capacity(&config.sim);
    if n == 0 {
        return Ok((HistoryWindow::empty(config.season_start, 600)?, start));
    }
    let actions = config.training.actions(n, config.seed_for(2));
    let w = weather.slice(0, n)?;
    let traj = simulate_actions(&start, &actions, &w, &config.sim)?;
    let end = *traj.states.last().expect("non-empty");
    Ok((observed_history(&actions, &w, &traj)?, end))
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub models: Option<Models>,
    pub seasons: Vec<SeasonReport>,
}

impl ScenarioOutcome {
    pub fn season(&self, controller: &str) -> Option<&SeasonReport> {
        self.seasons.iter().find(|s| s.summary.controller == controller)
    }
}

/// Run every configured controller over the same season.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutcome> {
    config.validate()?;
    let weather = scenario_weather(config)?;
    let (history, state) = training_history(config, &weather)?;
    let truth = weather.slice(config.training_steps(), weather.len() - config.training_steps())?;
    let opts = SeasonOptions {
        noise: config.noise.clone(),
        clue_refresh: config.clue_refresh,
        seed: config.seed_for(3),
    };
    let models = if config.controllers.contains(&ControllerKind::Mpc) {
        Some(forecast::fit(&history, &config.forecast)?)
    } else {
        None
    };
    let mut seasons = Vec::with_capacity(config.controllers.len());
    for &kind in &config.controllers {
        let learned;
        let oracle;
        let controller = match kind {
            ControllerKind::Never => Controller::Never,
            ControllerKind::Weekly => Controller::Weekly(config.weekly),
            ControllerKind::Mpc => {
                learned = LearnedForecaster {
                    models: models.clone().expect("fitted above"),
                    params: config.sim,
                };
                Controller::Mpc {
                    forecaster: &learned,
                    config: config.mpc.clone(),
                }
            }
            ControllerKind::Oracle => {
                oracle = SimulatorForecaster { params: config.sim };
                Controller::Mpc {
                    forecaster: &oracle,
                    config: config.mpc.clone(),
                }
            }
        };
        let mut report = run_closed_loop(&config.sim, state, &history, &truth, &controller, config.season_steps(), &opts)?;
        report.summary.controller = kind.name().into();
        seasons.push(report);
    }
    Ok(ScenarioOutcome { models, seasons })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_policy_respects_bounds() {
        let p = TrainingPolicy::default();
        let a = p.actions(20_000, 3);
        assert_eq!(a.len(), 20_000);
        assert!(!a[0]);
        let runs: Vec<(bool, usize)> = a.chunk_by(|x, y| x == y).map(|c| (c[0], c.len())).collect();
        for &(f, len) in &runs[..runs.len() - 1] {
            if f {
                assert!((36..=144).contains(&len));
            } else {
                assert!((144..=720).contains(&len));
            }
        }
        assert_eq!(a, p.actions(20_000, 3));
    }

    #[test]
    fn toml_defaults_and_rejections() {
        let c = ScenarioConfig::from_toml("seed = 3\n[mpc]\nsafety_margin_pct = 0.5\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.mpc.safety_margin_pct, 0.5);
        assert_eq!(c.season_days, 38);
        assert!(ScenarioConfig::from_toml("sede = 3").is_err());
        assert!(ScenarioConfig::from_toml("training_days = 10").is_err());
        assert!(ScenarioConfig::from_toml("controllers = [\"weekly\"]\ntraining_days = 0").is_ok());
    }

    #[test]
    fn never_with_zero_rain_recharges_nothing() {
        let mut c = ScenarioConfig {
            controllers: vec![ControllerKind::Never],
            training_days: 0,
            season_days: 5,
            ..Default::default()
        };
        c.weather.rain_rate_per_day = 0.0;
        let out = run_scenario(&c).unwrap();
        let s = out.season("never").unwrap();
        assert_eq!(s.summary.flood_steps, 0);
        assert!(s.recharge().abs() < 1e-12);
    }
}
