//! Receding-horizon flooding controller: score every admissible plan with a forecaster, keep
//! those whose forecast oxygen stays above the safety threshold, and pick the one expected to
//! recharge the most water.

mod closed_loop;
mod scorer;

pub use closed_loop::{
    run_closed_loop, write_decision_log, ControlInput, Controller, DecisionRecord, SeasonOptions,
    SeasonReport, SeasonSummary, WeeklySchedule,
};
pub(crate) use closed_loop::mix;
pub use scorer::{evaluate_plan, LearnedForecaster, LinearPlanScorer, SimulatorForecaster};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{enumerate_plans, FloodingPlan, InitialRunState, PlanConstraints};
use crate::types::O_ATM_PCT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    pub o_safe_pct: f64,
    pub safety_margin_pct: f64,
    /// Steps between re-plans; the chosen plan is executed in between.
    pub replan_every: usize,
    /// Per-step weight on recharge in the objective; 1 counts every step alike. Below 1, water
    /// recharged sooner is worth more, so the controller does not defer floods it could make now.
    pub discount: f64,
    pub constraints: PlanConstraints,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            o_safe_pct: 10.0,
            safety_margin_pct: 0.25,
            replan_every: 1,
            discount: 0.998,
            constraints: PlanConstraints::paper_scale(),
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.o_safe_pct > 0.0 && self.o_safe_pct < O_ATM_PCT) {
            return Err(Error::InvalidParams(format!(
                "o_safe_pct must be in (0, {O_ATM_PCT}), got {}",
                self.o_safe_pct
            )));
        }
        if !(self.safety_margin_pct >= 0.0 && self.safety_margin_pct.is_finite()) {
            return Err(Error::InvalidParams("safety_margin_pct must be >= 0".into()));
        }
        if self.replan_every == 0 {
            return Err(Error::InvalidParams("replan_every must be >= 1".into()));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::InvalidParams(format!("discount must be in (0, 1], got {}", self.discount)));
        }
        self.constraints.validate()
    }

    pub fn horizon(&self) -> usize {
        self.constraints.horizon
    }

    /// Lowest forecast oxygen a plan may reach.
    pub fn oxygen_floor(&self) -> f64 {
        self.o_safe_pct + self.safety_margin_pct
    }
}

/// Forecast consequences of one plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanScore {
    pub min_oxygen: f64,
    /// Estimated recharge over the horizon, mm.
    pub objective_mm: f64,
}

/// Forecast consequences of a plan under one control context.
pub trait PlanScorer: Sync {
    fn horizon(&self) -> usize;
    fn score(&self, plan: &FloodingPlan) -> PlanScore;
}

/// Produces a plan scorer for the current control context.
pub trait Forecaster: Sync {
    fn scorer<'a>(&'a self, input: &ControlInput<'a>, config: &MpcConfig) -> Result<Box<dyn PlanScorer + 'a>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEvaluation {
    /// Position in enumeration order.
    pub index: usize,
    pub feasible: bool,
    pub min_forecast_oxygen: f64,
    pub objective_mm: f64,
    pub first_flood_start: Option<usize>,
    pub flood_run_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub timestamp: DateTime<Utc>,
    pub action: bool,
    pub plan: FloodingPlan,
    pub evaluation: PlanEvaluation,
    pub feasible_count: usize,
    pub evaluated_count: usize,
    /// No plan met the oxygen floor; the safest admissible plan was taken instead.
    pub fallback: bool,
}

pub fn evaluation_of(index: usize, plan: &FloodingPlan, score: PlanScore, config: &MpcConfig) -> PlanEvaluation {
    PlanEvaluation {
        index,
        feasible: score.min_oxygen >= config.oxygen_floor(),
        min_forecast_oxygen: score.min_oxygen,
        objective_mm: score.objective_mm,
        first_flood_start: plan.first_flood_start(),
        flood_run_count: plan.flood_run_count(),
    }
}

/// `true` when `a` should be preferred over `b` among feasible plans.
fn better(a: &PlanEvaluation, b: &PlanEvaluation) -> bool {
    use std::cmp::Ordering::*;
    match a.objective_mm.total_cmp(&b.objective_mm) {
        Greater => return true,
        Less => return false,
        Equal => {}
    }
    let start = |e: &PlanEvaluation| e.first_flood_start.unwrap_or(usize::MAX);
    match start(a).cmp(&start(b)) {
        Less => return true,
        Greater => return false,
        Equal => {}
    }
    match a.flood_run_count.cmp(&b.flood_run_count) {
        Less => true,
        Greater => false,
        Equal => a.index < b.index,
    }
}

/// Pick the feasible plan with the largest objective. Ties go to the earlier first flood,
/// then fewer flood runs, then enumeration order. Without a feasible plan the all-zero plan is
/// taken, or, while a flood is in progress, the plan that ends it soonest.
pub fn select_plan(
    plans: &[FloodingPlan],
    evaluations: &[PlanEvaluation],
    timestamp: DateTime<Utc>,
) -> Result<Decision> {
    if evaluations.is_empty() {
        return Err(Error::Empty("no plan evaluations to select from"));
    }
    if plans.len() != evaluations.len() {
        return Err(Error::LengthMismatch {
            what: "plans vs evaluations",
            expected: plans.len(),
            actual: evaluations.len(),
        });
    }
    let feasible_count = evaluations.iter().filter(|e| e.feasible).count();
    let best = evaluations
        .iter()
        .filter(|e| e.feasible)
        .fold(None::<&PlanEvaluation>, |acc, e| match acc {
            Some(b) if !better(e, b) => Some(b),
            _ => Some(e),
        });
    let (chosen, fallback) = match best {
        Some(e) => (e, false),
        None => {
            let leading = |e: &PlanEvaluation| plans[e.index].steps().iter().take_while(|&&s| s).count();
            let e = evaluations
                .iter()
                .min_by(|a, b| {
                    leading(a)
                        .cmp(&leading(b))
                        .then(plans[a.index].flood_steps().cmp(&plans[b.index].flood_steps()))
                        .then(a.index.cmp(&b.index))
                })
                .expect("non-empty");
            (e, true)
        }
    };
    let plan = plans[chosen.index].clone();
    Ok(Decision {
        timestamp,
        action: plan.steps().first().copied().unwrap_or(false),
        plan,
        evaluation: chosen.clone(),
        feasible_count,
        evaluated_count: evaluations.len(),
        fallback,
    })
}

/// Initial run state for planning, from the executed flood column. A flood that has reached
/// `max_flood` must stop now, which plans like an idle run of length zero.
pub fn planning_state(flood: &[f64], c: &PlanConstraints) -> InitialRunState {
    match InitialRunState::from_history(flood) {
        InitialRunState::Flooding(e) if e >= c.max_flood => InitialRunState::Idle(0),
        s => s,
    }
}

/// Score every plan on the current rayon pool. Scores are pure, and results keep plan order,
/// so the outcome does not depend on the thread count.
pub fn evaluate_all(plans: &[FloodingPlan], scorer: &dyn PlanScorer, config: &MpcConfig) -> Vec<PlanEvaluation> {
    plans
        .par_iter()
        .enumerate()
        .map(|(i, p)| evaluation_of(i, p, scorer.score(p), config))
        .collect()
}

/// One controller invocation: enumerate admissible plans from the flood history, score them,
/// and select.
pub fn control_step(
    input: &ControlInput<'_>,
    forecaster: &dyn Forecaster,
    config: &MpcConfig,
) -> Result<Decision> {
    config.validate()?;
    let init = planning_state(input.recent.column(crate::types::Variate::Flood), &config.constraints);
    let plans = enumerate_plans(&config.constraints, init)?;
    decide(input, forecaster, config, &plans)
}

pub(crate) fn decide(
    input: &ControlInput<'_>,
    forecaster: &dyn Forecaster,
    config: &MpcConfig,
    plans: &[FloodingPlan],
) -> Result<Decision> {
    let scorer = forecaster.scorer(input, config)?;
    if scorer.horizon() != config.horizon() {
        return Err(Error::LengthMismatch {
            what: "forecast horizon vs plan horizon",
            expected: config.horizon(),
            actual: scorer.horizon(),
        });
    }
    let evals = evaluate_all(plans, scorer.as_ref(), config);
    select_plan(plans, &evals, input.recent.axis().end())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn ev(index: usize, feasible: bool, obj: f64, start: Option<usize>) -> PlanEvaluation {
        PlanEvaluation {
            index,
            feasible,
            min_forecast_oxygen: if feasible { 15.0 } else { 5.0 },
            objective_mm: obj,
            first_flood_start: start,
            flood_run_count: start.is_some() as usize,
        }
    }

    fn plan(s: &str) -> FloodingPlan {
        FloodingPlan::parse_line(s, 1).unwrap()
    }

    fn t() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 3, 1, 0, 0, 0).unwrap()
    }

    #[test]
    fn feasibility_threshold() {
        let c = MpcConfig::default();
        let p = plan("0000");
        let e = evaluation_of(0, &p, PlanScore { min_oxygen: 10.1, objective_mm: 0.0 }, &c);
        assert!(!e.feasible);
        let e = evaluation_of(0, &p, PlanScore { min_oxygen: 10.25, objective_mm: 0.0 }, &c);
        assert!(e.feasible);
    }

    #[test]
    fn selection_rules() {
        let plans = [plan("000000"), plan("001100"), plan("110000")];
        let d = select_plan(&plans[..1], &[ev(0, true, 3.0, None)], t()).unwrap();
        assert_eq!(d.plan, plans[0]);

        let evals = [ev(0, true, 1.0, None), ev(1, true, 9.0, Some(60)), ev(2, true, 9.0, Some(12))];
        let d = select_plan(&plans, &evals, t()).unwrap();
        assert_eq!(d.evaluation.index, 2);
        assert!(d.action && !d.fallback);

        let evals = [ev(0, false, 0.0, None), ev(1, false, 9.0, Some(2)), ev(2, false, 9.0, Some(0))];
        let d = select_plan(&plans, &evals, t()).unwrap();
        assert!(d.fallback && !d.action);
        assert_eq!(d.plan, plans[0]);
        assert_eq!(d.feasible_count, 0);

        assert!(select_plan(&[], &[], t()).is_err());
    }

    #[test]
    fn fallback_while_flooding_stops_soonest() {
        let plans = [plan("111000"), plan("111111"), plan("110000")];
        let evals = [ev(0, false, 5.0, Some(0)), ev(1, false, 9.0, Some(0)), ev(2, false, 1.0, Some(0))];
        let d = select_plan(&plans, &evals, t()).unwrap();
        assert_eq!(d.plan, plans[2]);
    }

    #[test]
    fn max_flood_reached_plans_as_idle() {
        let c = PlanConstraints::paper_scale();
        let mut f = vec![0.0; 200];
        f[56..].iter_mut().for_each(|x| *x = 1.0);
        assert_eq!(planning_state(&f, &c), InitialRunState::Idle(0));
        f[60..].iter_mut().for_each(|x| *x = 0.0);
        f[100..].iter_mut().for_each(|x| *x = 1.0);
        assert_eq!(planning_state(&f, &c), InitialRunState::Flooding(100));
    }
}
