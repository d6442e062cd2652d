use std::collections::HashMap;
use std::io::Write;

use chrono::{DateTime, Datelike, Timelike, Utc, Weekday};
use serde::{Deserialize, Serialize};

use super::{decide, planning_state, Decision, Forecaster, MpcConfig};
use crate::error::{Error, Result};
use crate::metrics::{odr_values, recharge_per_week};
use crate::planner::{enumerate_plans, FloodingPlan, InitialRunState};
use crate::sim::{observe, step_unchecked, SimParams, SimState, Trajectory};
use crate::types::{HistoryWindow, TimeAxis, Variate};
use crate::weather::{format_timestamp, perturb_forecast, ForecastNoise, WeatherSeries};

/// What a controller sees at one decision point.
#[derive(Debug, Clone, Copy)]
pub struct ControlInput<'a> {
    /// Sensor history up to the decision time.
    pub recent: &'a HistoryWindow,
    /// Weather forecast over the planning horizon, starting where `recent` ends.
    pub weather_clue: &'a WeatherSeries,
    /// True field state; only oracle forecasters read it.
    pub state: Option<SimState>,
}

/// Fixed-interval baseline: one flood of fixed length per week.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeeklySchedule {
    pub weekday: Weekday,
    pub start_hour: u32,
    pub duration_hours: u32,
}

impl Default for WeeklySchedule {
    fn default() -> Self {
        Self {
            weekday: Weekday::Mon,
            start_hour: 8,
            duration_hours: 24,
        }
    }
}

impl WeeklySchedule {
    pub fn validate(&self) -> Result<()> {
        if self.start_hour > 23 || self.duration_hours == 0 || self.duration_hours > 7 * 24 {
            return Err(Error::InvalidParams(format!("invalid weekly schedule {self:?}")));
        }
        Ok(())
    }

    pub fn action(&self, t: DateTime<Utc>) -> bool {
        let week = 7 * 86_400i64;
        let day = (t.weekday().num_days_from_monday() as i64
            - self.weekday.num_days_from_monday() as i64)
            * 86_400;
        let since = (day + t.num_seconds_from_midnight() as i64 - self.start_hour as i64 * 3600)
            .rem_euclid(week);
        since < self.duration_hours as i64 * 3600
    }
}

pub enum Controller<'a> {
    Never,
    Weekly(WeeklySchedule),
    Mpc {
        forecaster: &'a dyn Forecaster,
        config: MpcConfig,
    },
}

impl Controller<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Never => "never",
            Controller::Weekly(_) => "weekly",
            Controller::Mpc { .. } => "mpc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeasonOptions {
    pub noise: ForecastNoise,
    /// Steps between weather forecast issues.
    pub clue_refresh: usize,
    pub seed: u64,
}

impl Default for SeasonOptions {
    fn default() -> Self {
        Self {
            noise: ForecastNoise::default(),
            clue_refresh: 36,
            seed: 0,
        }
    }
}

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub timestamp: String,
    pub action: u8,
    pub plan: String,
    pub objective_mm: f64,
    pub min_forecast_oxygen: f64,
    pub feasible_count: usize,
    pub fallback: bool,
}

impl From<&Decision> for DecisionRecord {
    fn from(d: &Decision) -> Self {
        Self {
            timestamp: format_timestamp(d.timestamp),
            action: d.action as u8,
            plan: d.plan.to_string(),
            objective_mm: d.evaluation.objective_mm,
            min_forecast_oxygen: d.evaluation.min_forecast_oxygen,
            feasible_count: d.feasible_count,
            fallback: d.fallback,
        }
    }
}

pub fn write_decision_log<W: Write>(records: &[DecisionRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonSummary {
    pub controller: String,
    pub start: String,
    pub steps: usize,
    pub odr: f64,
    pub recharge_in_per_week: f64,
    pub total_flood_mm: f64,
    pub flood_steps: usize,
    pub min_oxygen: f64,
    pub decisions: usize,
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeasonReport {
    pub summary: SeasonSummary,
    pub axis: TimeAxis,
    pub actions: Vec<bool>,
    pub precip_mm: Vec<f64>,
    pub trajectory: Trajectory,
    pub decisions: Vec<DecisionRecord>,
}

impl SeasonReport {
    pub fn odr(&self) -> f64 {
        self.summary.odr
    }

    pub fn recharge(&self) -> f64 {
        self.summary.recharge_in_per_week
    }

    /// Plot data: oxygen trace with flood and precipitation bars, one row per step.
    pub fn write_plot_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["timestamp", "flood", "precip_mm", "oxygen_pct", "swc", "drainage_mm"])?;
        for (i, (s, o)) in self.trajectory.states.iter().zip(&self.trajectory.outputs).enumerate() {
            w.write_record([
                format_timestamp(self.axis.timestamp(i)),
                (self.actions[i] as u8).to_string(),
                self.precip_mm[i].to_string(),
                s.oxygen.to_string(),
                s.swc.to_string(),
                o.drainage_mm.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn mix(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Planner cache key: idle runs at least `min_idle` long behave alike.
fn cache_key(init: InitialRunState, min_idle: usize) -> InitialRunState {
    match init {
        InitialRunState::Idle(e) => InitialRunState::Idle(e.min(min_idle)),
        s => s,
    }
}

/// Run one season: at every step the controller picks an action from the sensor history and a
/// noisy weather forecast, then the simulator advances under the true weather.
///
/// `truth` starts where `history` ends and must extend one planning horizon past the season
/// for MPC controllers.
pub fn run_closed_loop(
    params: &SimParams,
    initial: SimState,
    history: &HistoryWindow,
    truth: &WeatherSeries,
    controller: &Controller<'_>,
    steps: usize,
    opts: &SeasonOptions,
) -> Result<SeasonReport> {
    params.validate()?;
    initial.validate(params)?;
    opts.noise.validate()?;
    if opts.clue_refresh == 0 {
        return Err(Error::InvalidParams("clue_refresh must be >= 1".into()));
    }
    if steps == 0 {
        return Err(Error::Empty("season has no steps"));
    }
    if !history.is_empty()
        && (truth.axis().start() != history.axis().end()
            || truth.axis().step_secs() != history.axis().step_secs())
    {
        return Err(Error::InvalidAxis(format!(
            "season weather starts at {} but history ends at {}",
            truth.axis().start(),
            history.axis().end()
        )));
    }
    let horizon = match controller {
        Controller::Mpc { config, .. } => {
            config.validate()?;
            if steps < config.horizon() {
                return Err(Error::InvalidParams(format!(
                    "season of {steps} steps is shorter than the planning horizon {}",
                    config.horizon()
                )));
            }
            config.horizon()
        }
        Controller::Weekly(s) => {
            s.validate()?;
            0
        }
        Controller::Never => 0,
    };
    if truth.len() < steps + horizon {
        return Err(Error::LengthMismatch {
            what: "season weather (season plus planning horizon)",
            expected: steps + horizon,
            actual: truth.len(),
        });
    }

    let axis = truth.axis().with_len(steps);
    let keep = (4 * horizon).max(history.len().min(8 * 1440));
    let mut hist = if history.len() > keep { history.tail(keep)? } else { history.clone() };
    let mut state = initial;
    let mut actions = Vec::with_capacity(steps);
    let mut states = Vec::with_capacity(steps);
    let mut outputs = Vec::with_capacity(steps);
    let mut decisions = Vec::new();
    let mut fallbacks = 0;
    let mut current: Option<(usize, FloodingPlan)> = None;
    let mut issued: Option<(usize, WeatherSeries)> = None;
    let mut plan_cache: HashMap<InitialRunState, Vec<FloodingPlan>> = HashMap::new();

    for t in 0..steps {
        let action = match controller {
            Controller::Never => false,
            Controller::Weekly(s) => s.action(axis.timestamp(t)),
            Controller::Mpc { forecaster, config } => {
                let due = current
                    .as_ref()
                    .is_none_or(|(at, _)| t - at >= config.replan_every);
                if due {
                    let issue = t - t % opts.clue_refresh;
                    if issued.as_ref().is_none_or(|(i, _)| *i != issue) {
                        let len = (opts.clue_refresh + horizon).min(truth.len() - issue);
                        let product = perturb_forecast(
                            &truth.slice(issue, len)?,
                            &opts.noise,
                            mix(opts.seed, issue as u64),
                        )?;
                        issued = Some((issue, product));
                    }
                    let clue = issued.as_ref().unwrap().1.slice(t - issue, horizon)?;
                    let c = &config.constraints;
                    let init = planning_state(hist.column(Variate::Flood), c);
                    if plan_cache.len() > 16 {
                        plan_cache.clear();
                    }
                    let plans = match plan_cache.entry(cache_key(init, c.min_idle)) {
                        std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                        std::collections::hash_map::Entry::Vacant(e) => e.insert(enumerate_plans(c, init)?),
                    };
                    let input = ControlInput {
                        recent: &hist,
                        weather_clue: &clue,
                        state: Some(state),
                    };
                    let d = decide(&input, *forecaster, config, plans)?;
                    fallbacks += d.fallback as usize;
                    decisions.push(DecisionRecord::from(&d));
                    current = Some((t, d.plan));
                }
                let (at, plan) = current.as_ref().unwrap();
                plan.steps()[t - at]
            }
        };
        let w = truth.record(t);
        let (next, out) = step_unchecked(&state, action, &w, params);
        state = next;
        actions.push(action);
        states.push(next);
        outputs.push(out);
        let row = observe(&next, action, &w);
        if hist.is_empty() {
            hist = HistoryWindow::empty(axis.start(), axis.step_secs())?;
        }
        hist.push_row(row);
        if hist.len() > 2 * keep.max(1) {
            hist = hist.tail(keep.max(1))?;
        }
    }

    let trajectory = Trajectory { states, outputs };
    let oxygen = trajectory.oxygen();
    let flood_steps = actions.iter().filter(|&&a| a).count();
    let summary = SeasonSummary {
        controller: controller.name().into(),
        start: format_timestamp(axis.start()),
        steps,
        odr: odr_values(&oxygen, match controller {
            Controller::Mpc { config, .. } => config.o_safe_pct,
            _ => MpcConfig::default().o_safe_pct,
        })?,
        recharge_in_per_week: recharge_per_week(&trajectory.drainage(), &axis)?,
        total_flood_mm: flood_steps as f64 * params.flood_gain_mm_per_step,
        flood_steps,
        min_oxygen: oxygen.iter().copied().fold(f64::INFINITY, f64::min),
        decisions: decisions.len(),
        fallbacks,
    };
    Ok(SeasonReport {
        summary,
        axis,
        actions,
        precip_mm: truth.precip_mm[..steps].to_vec(),
        trajectory,
        decisions,
    })
}
