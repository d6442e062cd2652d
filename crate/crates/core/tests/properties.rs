//! Randomized properties of the planner and the simulator.

use std::collections::BTreeSet;

use aquamar::planner::{count_plans, enumerate_plans, is_valid_plan};
use aquamar::sim::step;
use aquamar::{FloodingPlan, InitialRunState, PlanConstraints, SimParams, SimState, WeatherRecord};
use chrono::{TimeZone, Utc};
use proptest::prelude::*;

fn constraints() -> impl Strategy<Value = PlanConstraints> {
    (1usize..=12, 1usize..=4, 0usize..=4, 1usize..=4, 1usize..=3, prop::option::of(1usize..=3)).prop_map(
        |(horizon, min_flood, extra, min_idle, quantum, max_flood_runs)| PlanConstraints {
            min_flood,
            max_flood: min_flood + extra,
            min_idle,
            quantum,
            horizon,
            max_flood_runs,
        },
    )
}

fn init_for(c: &PlanConstraints, pick: usize) -> InitialRunState {
    match pick % 4 {
        0 => InitialRunState::FRESH,
        1 => InitialRunState::Idle(pick % (c.min_idle + 1)),
        _ => InitialRunState::Flooding(1 + pick % c.max_flood.saturating_sub(1).max(1)),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Enumeration equals filtering every string through `is_valid_plan`, with quanta and run caps.
    #[test]
    fn enumeration_is_the_valid_set(c in constraints(), pick in 0usize..64) {
        prop_assume!(c.validate().is_ok());
        let init = init_for(&c, pick);
        prop_assume!(!matches!(init, InitialRunState::Flooding(e) if e >= c.max_flood));
        let listed = enumerate_plans(&c, init).unwrap();
        let got: BTreeSet<String> = listed.iter().map(|p| p.to_string()).collect();
        prop_assert_eq!(got.len(), listed.len(), "duplicates");
        let want: BTreeSet<String> = (0..1u32 << c.horizon)
            .map(|b| FloodingPlan::new((0..c.horizon).map(|i| b >> i & 1 == 1).collect()).unwrap())
            .filter(|p| is_valid_plan(p, &c, init).unwrap())
            .map(|p| p.to_string())
            .collect();
        prop_assert_eq!(&got, &want);
        prop_assert_eq!(count_plans(&c, init).unwrap(), want.len() as u128);
    }

    /// Every step balances to round-off and keeps the state inside its bounds.
    #[test]
    fn step_conserves_water(
        swc in 0.05f64..=0.45,
        oxygen in 0.0f64..=20.9,
        flood: bool,
        precip in prop_oneof![Just(0.0), 0.0f64..20.0],
        temp in -10.0f64..40.0,
        minute in 0u32..1440,
    ) {
        let params = SimParams::default();
        let s = SimState { swc: swc.clamp(params.theta_r, params.theta_s), oxygen, ponded: false };
        let w = WeatherRecord {
            timestamp: Utc.with_ymd_and_hms(2024, 3, 1, minute / 60, minute % 60, 0).unwrap(),
            precip_mm: precip,
            temp_c: temp,
            rh_pct: 60.0,
            wind_ms: 2.0,
        };
        let (next, out) = step(&s, flood, &w, &params).unwrap();
        prop_assert!(out.balance_residual().abs() <= 1e-9);
        prop_assert!(next.validate(&params).is_ok(), "{:?}", next);
        prop_assert!(out.drainage_mm >= 0.0 && out.et_mm >= 0.0);
    }
}
