use super::{evaluation_of, ControlInput, Forecaster, MpcConfig, PlanEvaluation, PlanScore, PlanScorer};
use crate::error::{Error, Result};
use crate::forecast::{calibrate, convolve_into, forecast, Models};
use crate::planner::FloodingPlan;
use crate::sim::{daylight_factor, step_unchecked, SimParams, SimState};
use crate::types::{ExogenousClues, HistoryWindow, Variate, O_ATM_PCT};
use crate::weather::{WeatherRecord, WeatherSeries};

fn clues_for(weather: &WeatherSeries, flood: Vec<f64>) -> Result<ExogenousClues> {
    ExogenousClues::new(
        *weather.axis(),
        flood,
        weather.precip_mm.clone(),
        weather.temp_c.clone(),
        weather.rh_pct.clone(),
        weather.wind_ms.clone(),
    )
}

/// Water-balance terms of the recharge objective that do not depend on the plan.
#[derive(Debug, Clone)]
struct Balance {
    flood_gain: f64,
    /// `γ^t` for `t` in `0..H`, and its prefix sums (`weight_sum[t] = Σ_{i<t} γ^i`).
    weight: Vec<f64>,
    weight_sum: Vec<f64>,
    precip_term: f64,
    /// Discounted potential ET per step before the soil-water limiter.
    et_potential: Vec<f64>,
    theta_start: f64,
    params: SimParams,
}

impl Balance {
    fn new(params: &SimParams, weather: &WeatherSeries, theta_start: f64, discount: f64) -> Self {
        let axis = weather.axis();
        let weight: Vec<f64> = (0..weather.len()).map(|t| discount.powi(t as i32)).collect();
        let mut weight_sum = vec![0.0];
        for w in &weight {
            weight_sum.push(weight_sum.last().unwrap() + w);
        }
        let et_potential = (0..weather.len())
            .map(|t| {
                weight[t]
                    * params.et_base_mm_per_step
                    * (weather.temp_c[t] / params.t_ref_c).max(0.0)
                    * daylight_factor(axis.hour_of_day(t))
            })
            .collect();
        Self {
            flood_gain: params.flood_gain_mm_per_step,
            precip_term: weather.precip_mm.iter().zip(&weight).map(|(p, w)| p * w).sum(),
            weight,
            weight_sum,
            et_potential,
            theta_start,
            params: *params,
        }
    }

    /// `Σ_t γ^t (F·f_t + p_t − ET_t(θ̂_t) − z_root·(θ̂_t − θ̂_{t−1}))`; with `γ = 1` this is
    /// `F·Σf + Σp − ΣET − z_root·(θ̂_end − θ̂_start)`.
    fn objective(&self, plan: &FloodingPlan, swc: &[f64]) -> f64 {
        let flood: f64 = plan
            .flood_runs()
            .map(|r| self.weight_sum[r.start + r.len] - self.weight_sum[r.start])
            .sum();
        let mut et = 0.0;
        let mut storage = 0.0;
        let mut prev = self.theta_start;
        for (t, &theta) in swc.iter().enumerate() {
            et += self.et_potential[t] * self.params.soil_limiter(theta);
            storage += self.weight[t] * (theta - prev);
            prev = theta;
        }
        self.flood_gain * flood + self.precip_term - et - self.params.z_root * storage
    }
}

/// Score one plan by running the full forecaster with the plan as flood clue.
pub fn evaluate_plan(
    plan: &FloodingPlan,
    recent: &HistoryWindow,
    weather_clue: &WeatherSeries,
    models: &Models,
    params: &SimParams,
    config: &MpcConfig,
) -> Result<PlanEvaluation> {
    if plan.len() != weather_clue.len() || plan.len() != models.horizon() {
        return Err(Error::LengthMismatch {
            what: "plan vs forecast horizon",
            expected: models.horizon(),
            actual: plan.len(),
        });
    }
    let clues = clues_for(weather_clue, plan.as_f64())?;
    let r = forecast(models, recent, &clues)?;
    let balance = Balance::new(params, weather_clue, last_swc(recent), config.discount);
    let score = PlanScore {
        min_oxygen: r.calibrated_oxygen.min().unwrap_or(f64::NAN),
        objective_mm: balance.objective(plan, &r.calibrated_swc),
    };
    Ok(evaluation_of(0, plan, score, config))
}

fn last_swc(recent: &HistoryWindow) -> f64 {
    recent.column(Variate::Swc).last().copied().unwrap_or(f64::NAN)
}

/// The learned forecaster with the site's water-balance parameters for the objective.
#[derive(Debug, Clone)]
pub struct LearnedForecaster {
    pub models: Models,
    pub params: SimParams,
}

impl Forecaster for LearnedForecaster {
    fn scorer<'a>(&'a self, input: &ControlInput<'a>, config: &MpcConfig) -> Result<Box<dyn PlanScorer + 'a>> {
        Ok(Box::new(LinearPlanScorer::new(
            &self.models,
            &self.params,
            input.recent,
            input.weather_clue,
            config.discount,
        )?))
    }
}

/// Plan scorer that exploits the linearity of calibration in the flood clue: the forecast for
/// any plan is the forecast for the all-zero plan plus the plan's flood runs passed through the
/// composite flood → (soil water →) oxygen impulse response.
#[derive(Debug, Clone)]
pub struct LinearPlanScorer {
    base_oxygen: Vec<f64>,
    base_swc: Vec<f64>,
    step_oxygen: Vec<f64>,
    step_swc: Vec<f64>,
    balance: Balance,
}

impl LinearPlanScorer {
    pub fn new(
        models: &Models,
        params: &SimParams,
        recent: &HistoryWindow,
        weather_clue: &WeatherSeries,
        discount: f64,
    ) -> Result<Self> {
        let prelim = models.predict_backbone(recent)?;
        let h = prelim.len();
        let base = calibrate(&prelim, &clues_for(weather_clue, vec![0.0; weather_clue.len()])?, &models.causal)?;
        let unclamped = |v: Variate| -> Vec<f64> {
            prelim
                .column(v)
                .iter()
                .zip(&base.deltas[v.index()])
                .map(|(p, d)| p + d)
                .collect()
        };
        let edge = |s: Variate, t: Variate| {
            models.causal.edge(s, t).ok_or(Error::MissingEdge {
                source_var: s.column_name(),
                target: t.column_name(),
            })
        };
        let mut impulse = vec![0.0; h];
        if h > 0 {
            impulse[0] = 1.0;
        }
        let mut resp_swc = vec![0.0; h];
        edge(Variate::Flood, Variate::Swc)?.apply_into(&impulse, &mut resp_swc);
        let mut resp_oxygen = vec![0.0; h];
        edge(Variate::Flood, Variate::Oxygen)?.apply_into(&impulse, &mut resp_oxygen);
        convolve_into(&edge(Variate::Swc, Variate::Oxygen)?.kernel(), &resp_swc, &mut resp_oxygen);
        let prefix = |k: Vec<f64>| -> Vec<f64> {
            k.iter()
                .scan(0.0, |acc, x| {
                    *acc += x;
                    Some(*acc)
                })
                .collect()
        };
        Ok(Self {
            base_oxygen: unclamped(Variate::Oxygen),
            base_swc: unclamped(Variate::Swc),
            step_oxygen: prefix(resp_oxygen),
            step_swc: prefix(resp_swc),
            balance: Balance::new(params, weather_clue, last_swc(recent), discount),
        })
    }

    /// Calibrated soil water and oxygen for `plan`.
    pub fn trajectories(&self, plan: &FloodingPlan) -> (Vec<f64>, Vec<f64>) {
        let runs: Vec<_> = plan.flood_runs().collect();
        let h = self.base_oxygen.len();
        let mut swc = Vec::with_capacity(h);
        let mut oxygen = Vec::with_capacity(h);
        for t in 0..h {
            let (mut dsw, mut dox) = (0.0, 0.0);
            for r in runs.iter().filter(|r| r.start <= t) {
                let k = t - r.start;
                dsw += self.step_swc[k];
                dox += self.step_oxygen[k];
                if k >= r.len {
                    dsw -= self.step_swc[k - r.len];
                    dox -= self.step_oxygen[k - r.len];
                }
            }
            swc.push((self.base_swc[t] + dsw).clamp(0.0, 1.0));
            oxygen.push((self.base_oxygen[t] + dox).clamp(0.0, O_ATM_PCT));
        }
        (swc, oxygen)
    }
}

impl PlanScorer for LinearPlanScorer {
    fn horizon(&self) -> usize {
        self.base_oxygen.len()
    }

    fn score(&self, plan: &FloodingPlan) -> PlanScore {
        let (swc, oxygen) = self.trajectories(plan);
        PlanScore {
            min_oxygen: oxygen.iter().copied().fold(f64::INFINITY, f64::min),
            objective_mm: self.balance.objective(plan, &swc),
        }
    }
}

/// Oracle forecaster: rolls the simulator forward from the true field state under the clue
/// weather. Exact when the clue is the true weather.
#[derive(Debug, Clone)]
pub struct SimulatorForecaster {
    pub params: SimParams,
}

struct OracleScorer {
    params: SimParams,
    weather: Vec<WeatherRecord>,
    /// State before step `t` under the all-zero plan, for `t` in `0..=H`.
    idle_states: Vec<SimState>,
    /// Minimum oxygen and total drainage over steps `0..t` of the all-zero plan.
    idle_min: Vec<f64>,
    idle_drain: Vec<f64>,
    discount: f64,
}

impl Forecaster for SimulatorForecaster {
    fn scorer<'a>(&'a self, input: &ControlInput<'a>, config: &MpcConfig) -> Result<Box<dyn PlanScorer + 'a>> {
        let state = input
            .state
            .ok_or_else(|| Error::InvalidParams("the simulator forecaster needs the field state".into()))?;
        self.params.validate()?;
        state.validate(&self.params)?;
        let weather: Vec<WeatherRecord> = input.weather_clue.records().collect();
        let mut idle_states = vec![state];
        let mut idle_min = vec![f64::INFINITY];
        let mut idle_drain = vec![0.0];
        let mut s = state;
        for (t, w) in weather.iter().enumerate() {
            let (next, out) = step_unchecked(&s, false, w, &self.params);
            s = next;
            idle_states.push(s);
            idle_min.push(idle_min.last().unwrap().min(s.oxygen));
            idle_drain.push(idle_drain.last().unwrap() + config.discount.powi(t as i32) * out.drainage_mm);
        }
        Ok(Box::new(OracleScorer {
            params: self.params,
            weather,
            idle_states,
            idle_min,
            idle_drain,
            discount: config.discount,
        }))
    }
}

impl PlanScorer for OracleScorer {
    fn horizon(&self) -> usize {
        self.weather.len()
    }

    fn score(&self, plan: &FloodingPlan) -> PlanScore {
        let h = self.weather.len();
        let s0 = plan.first_flood_start().unwrap_or(h);
        let mut state = self.idle_states[s0];
        let mut min_oxygen = self.idle_min[s0];
        let mut drain = self.idle_drain[s0];
        let mut weight = self.discount.powi(s0 as i32);
        for t in s0..h {
            let (next, out) = step_unchecked(&state, plan.steps()[t], &self.weather[t], &self.params);
            state = next;
            min_oxygen = min_oxygen.min(state.oxygen);
            drain += weight * out.drainage_mm;
            weight *= self.discount;
        }
        PlanScore {
            min_oxygen,
            objective_mm: drain,
        }
    }
}
