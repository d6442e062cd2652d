//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use aquamar::forecast::{self, fit_target, Deltas, ForecastConfig, Models};
use aquamar::mpc::{control_step, ControlInput, LearnedForecaster, MpcConfig};
use aquamar::planner::{count_plans, enumerate_plans};
use aquamar::scenario::{run_scenario, scenario_weather, training_history, ControllerKind, ScenarioConfig};
use aquamar::sim::{simulate_actions, step};
use aquamar::spectral::{action_frequency_bins, dominant_periods, periodogram};
use aquamar::weather::{synth_weather, ForecastNoise, SynthWeatherConfig};
use aquamar::{history, weather, FloodingPlan, InitialRunState, PlanConstraints, SimParams, SimState, Variate};
use chrono::{DateTime, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 2, 28, 0, 0, 0).unwrap()
}

// ---------------------------------------------------------------------------------------------
// 1. Planner vs brute force

/// Independent validity rule: every completed run must respect its bounds (flood runs within
/// [min_flood, max_flood], idle runs at least min_idle), a flood still open at the horizon end
/// must also lie within [min_flood, max_flood], and a trailing idle run is free. Runs in
/// progress at the horizon start carry their elapsed length.
fn brute_valid(bits: u32, h: usize, c: &PlanConstraints, init: InitialRunState) -> bool {
    let (mut flooding, mut len) = match init {
        InitialRunState::Idle(e) => (false, e),
        InitialRunState::Flooding(e) => (true, e),
    };
    for t in 0..h {
        let b = bits >> t & 1 == 1;
        if b == flooding {
            len = len.saturating_add(1);
            continue;
        }
        let closed_ok = if flooding {
            (c.min_flood..=c.max_flood).contains(&len)
        } else {
            len >= c.min_idle
        };
        if !closed_ok {
            return false;
        }
        flooding = b;
        len = 1;
    }
    !flooding || (c.min_flood..=c.max_flood).contains(&len)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut cases = 0usize;
    let mut plans = 0usize;
    for h in 1..=16usize {
        for min_flood in 1..=4 {
            for max_flood in min_flood..=6 {
                for min_idle in 1..=4 {
                    let c = PlanConstraints {
                        min_flood,
                        max_flood,
                        min_idle,
                        quantum: 1,
                        horizon: h,
                        max_flood_runs: None,
                    };
                    let mut inits = vec![
                        InitialRunState::FRESH,
                        InitialRunState::Idle(0),
                        InitialRunState::Idle(1),
                        InitialRunState::Idle(min_idle),
                    ];
                    inits.extend((1..max_flood).map(InitialRunState::Flooding));
                    for init in inits {
                        let got: BTreeSet<u32> = enumerate_plans(&c, init)
                            .map_err(|e| format!("{c:?} {init:?}: {e}"))?
                            .iter()
                            .map(|p| p.steps().iter().enumerate().map(|(i, &b)| (b as u32) << i).sum())
                            .collect();
                        let want: BTreeSet<u32> = (0..1u32 << h).filter(|&b| brute_valid(b, h, &c, init)).collect();
                        if got != want {
                            let extra = got.difference(&want).next();
                            let missing = want.difference(&got).next();
                            return Err(format!(
                                "mismatch at {c:?} {init:?}: extra {extra:?}, missing {missing:?}"
                            ));
                        }
                        let counted = count_plans(&c, init).map_err(|e| e.to_string())?;
                        if counted != want.len() as u128 {
                            return Err(format!("count_plans {counted} != {} at {c:?} {init:?}", want.len()));
                        }
                        cases += 1;
                        plans += want.len();
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        secs < 60.0,
        format!("{cases} (constraints, init) cases, {plans} plans, exact set equality, {secs:.1} s"),
    )
}

// ---------------------------------------------------------------------------------------------
// 2. Paper-scale plan count

const PAPER_SCALE_COUNT: u128 = 2015;

fn criterion_2() -> Outcome {
    let c = PlanConstraints::paper_scale();
    let n = count_plans(&c, InitialRunState::FRESH).map_err(|e| e.to_string())?;
    let listed = enumerate_plans(&c, InitialRunState::FRESH).map_err(|e| e.to_string())?.len() as u128;
    check(
        (1_000..=100_000).contains(&n) && n == PAPER_SCALE_COUNT && listed == n,
        format!("count_plans = {n} (fixture {PAPER_SCALE_COUNT}, enumerated {listed}), H = {}", c.horizon),
    )
}

// ---------------------------------------------------------------------------------------------
// 3. Conservation

fn criterion_3() -> Outcome {
    let params = SimParams::default();
    let n = 10_000;
    let wet = SynthWeatherConfig {
        rain_rate_per_day: 1.5,
        seed: 31,
        ..Default::default()
    };
    let w = synth_weather(&wet, t0(), n).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut flooding = false;
    let mut left = 0usize;
    let mut s = SimState {
        swc: params.theta_wp,
        oxygen: 15.0,
        ponded: false,
    };
    let mut worst = 0.0f64;
    let mut rain = 0.0;
    for i in 0..n {
        if left == 0 {
            flooding = !flooding;
            left = if flooding { rng.random_range(1..300) } else { rng.random_range(1..600) };
        }
        left -= 1;
        rain += w.precip_mm[i];
        let (next, out) = step(&s, flooding, &w.record(i), &params).map_err(|e| format!("step {i}: {e}"))?;
        worst = worst.max(out.balance_residual().abs());
        if next.validate(&params).is_err() || !next.swc.is_finite() || !next.oxygen.is_finite() {
            return Err(format!("state out of bounds at step {i}: {next:?}"));
        }
        s = next;
    }
    check(
        worst <= 1e-9,
        format!("{n} steps, {rain:.0} mm rain, max |residual| = {worst:.2e} mm, states within bounds"),
    )
}

// ---------------------------------------------------------------------------------------------
// 4. Qualitative dynamics

fn criterion_4() -> Outcome {
    let params = SimParams::default();
    let dry = SynthWeatherConfig {
        rain_rate_per_day: 0.0,
        ..Default::default()
    };
    let n = 1440;
    let w = synth_weather(&dry, t0(), n).map_err(|e| e.to_string())?;
    let start = SimState::at_field_capacity(&params);
    let argmin = |v: &[f64]| {
        v.iter()
            .enumerate()
            .fold((0, f64::INFINITY), |a, (i, &x)| if x < a.1 { (i, x) } else { a })
    };
    let mut details = Vec::new();
    let mut ok = true;
    for (on, len) in [(48usize, 36usize), (48, 72), (200, 144)] {
        let actions: Vec<bool> = (0..n).map(|i| (on..on + len).contains(&i)).collect();
        let tr = simulate_actions(&start, &actions, &w, &params).map_err(|e| e.to_string())?;
        let (i, min) = argmin(&tr.oxygen());
        let off = on + len - 1;
        ok &= i >= off;
        details.push(format!("{len}-step flood: off at {off}, trough {min:.2}% at {i}"));
    }
    let tr = simulate_actions(&start, &vec![true; 720], &w.slice(0, 720).unwrap(), &params).map_err(|e| e.to_string())?;
    let (_, min) = argmin(&tr.oxygen());
    ok &= min < 10.0;
    details.push(format!("720-step flood: min {min:.2}%"));
    check(ok, details.join("; "))
}

// ---------------------------------------------------------------------------------------------
// 5. Spectral

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let n = 4032;
    let tau = std::f64::consts::TAU;
    let planted: Vec<f64> = (0..n)
        .map(|i| (tau * i as f64 / 144.0).sin() + noise.sample(&mut rng))
        .collect();
    let spec = periodogram(&planted).map_err(|e| e.to_string())?;
    let found = dominant_periods(&spec, 3, &BTreeSet::new());

    // Daily cycle plus a stronger response to a weekly 24 h flood.
    let flood: Vec<f64> = (0..n).map(|i| if i % 1008 < 144 { 1.0 } else { 0.0 }).collect();
    let composite: Vec<f64> = (0..n)
        .map(|i| (tau * i as f64 / 144.0).sin() - 4.0 * flood[i] + 0.1 * noise.sample(&mut rng))
        .collect();
    let cspec = periodogram(&composite).map_err(|e| e.to_string())?;
    let raw = dominant_periods(&cspec, 3, &BTreeSet::new());
    let excluded = action_frequency_bins(&flood, aquamar::spectral::DEFAULT_AMP_RATIO);
    let filtered = dominant_periods(&cspec, 3, &excluded);
    check(
        found.first() == Some(&144) && filtered.first() == Some(&144),
        format!("planted → {found:?}; composite unfiltered → {raw:?}, filtered → {filtered:?}"),
    )
}

// ---------------------------------------------------------------------------------------------
// 6. Causal recovery

fn planted_windows(sigma: f64) -> Vec<Deltas> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let unit = Normal::new(0.0, 1.0).unwrap();
    (0..30)
        .map(|_| {
            let x: Vec<f64> = (0..720).map(|_| unit.sample(&mut rng)).collect();
            let at = |i: isize| if i < 0 { 0.0 } else { x[i as usize] };
            let y: Vec<f64> = (0..720isize)
                .map(|t| 0.5 * at(t - 1) + 0.2 * at(t - 2) + 0.1 * (at(t) - at(t - 1)) + sigma * unit.sample(&mut rng))
                .collect();
            let mut w: Deltas = Default::default();
            for v in Variate::ALL {
                w[v.index()] = vec![0.0; 720];
            }
            w[Variate::Flood.index()] = x;
            w[Variate::Swc.index()] = y;
            w
        })
        .collect()
}

fn criterion_6() -> Outcome {
    let want = [0.5, 0.2, 0.1];
    let coefs = |sigma: f64, lambda: f64| -> Result<Vec<f64>, String> {
        let e = fit_target(Variate::Swc, &[(Variate::Flood, 2)], 1, &planted_windows(sigma), lambda)
            .map_err(|e| e.to_string())?
            .remove(0);
        Ok(e.level.iter().chain(&e.derivative).copied().collect())
    };
    let noisy = coefs(0.01, 0.1)?;
    let exact = coefs(0.0, 1e-9)?;
    let rel = noisy.iter().zip(want).map(|(g, w)| ((g - w) / w).abs()).fold(0.0, f64::max);
    let abs = exact.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    check(
        noisy.len() == 3 && exact.len() == 3 && rel <= 0.10 && abs <= 1e-6,
        format!("σ=0.01: {noisy:.4?} (max rel err {rel:.2e}); σ=0: max abs err {abs:.2e}"),
    )
}

// ---------------------------------------------------------------------------------------------
// 7. Calibration benefit

fn criterion_7() -> Outcome {
    let config = ScenarioConfig {
        training_days: 80,
        controllers: vec![ControllerKind::Never],
        seed: 17,
        ..Default::default()
    };
    let w = scenario_weather(&config).map_err(|e| e.to_string())?;
    let (hist, _) = training_history(&config, &w).map_err(|e| e.to_string())?;
    let train = 60 * 144;
    let models = forecast::fit(&hist.slice(0, train).unwrap(), &ForecastConfig::default()).map_err(|e| e.to_string())?;
    let t_in = models.input_len();
    let test = hist.slice(train - t_in, hist.len() - train + t_in).unwrap();
    let r = forecast::backtest(&models, &test, 24, Some(50)).map_err(|e| e.to_string())?;
    let wins = (r.calibrated_not_worse * r.windows.len() as f64).round();
    check(
        r.windows.len() == 50 && r.calibrated_not_worse >= 0.8,
        format!(
            "calibrated MSE ≤ preliminary on {wins}/{} held-out windows; mean MSE {:.3} → {:.3}",
            r.windows.len(),
            r.preliminary.mse,
            r.calibrated.mse
        ),
    )
}

// ---------------------------------------------------------------------------------------------
// 8. Closed loop

fn criterion_8(models: &mut Option<Models>) -> Outcome {
    let config = ScenarioConfig {
        controllers: vec![ControllerKind::Mpc, ControllerKind::Weekly],
        ..Default::default()
    };
    let start = Instant::now();
    let out = run_scenario(&config).map_err(|e| e.to_string())?;
    *models = out.models.clone();
    let mpc = &out.season("mpc").unwrap().summary;
    let weekly = &out.season("weekly").unwrap().summary;
    let season_secs = start.elapsed().as_secs_f64();

    let mut oracle_cfg = ScenarioConfig {
        controllers: vec![ControllerKind::Oracle],
        training_days: 0,
        season_days: 7,
        noise: ForecastNoise::none(),
        ..Default::default()
    };
    oracle_cfg.weather.rain_rate_per_day = 0.0;
    let oracle_out = run_scenario(&oracle_cfg).map_err(|e| e.to_string())?;
    let oracle = &oracle_out.season("oracle").unwrap().summary;

    let ok = mpc.odr <= 0.005
        && mpc.recharge_in_per_week >= 1.2 * weekly.recharge_in_per_week
        && mpc.odr < weekly.odr
        && mpc.recharge_in_per_week > weekly.recharge_in_per_week
        && oracle.odr == 0.0
        && oracle.flood_steps > 0;
    check(
        ok,
        format!(
            "seed {}, {} days, replan every {} steps: mpc ODR {:.2}% / {:.2} in/wk vs weekly ODR {:.2}% / {:.2} in/wk \
             (×{:.2}) in {season_secs:.0} s; oracle, zero rain, {} days: ODR {} with {} flood steps",
            config.seed,
            config.season_days,
            config.mpc.replan_every,
            100.0 * mpc.odr,
            mpc.recharge_in_per_week,
            100.0 * weekly.odr,
            weekly.recharge_in_per_week,
            mpc.recharge_in_per_week / weekly.recharge_in_per_week,
            oracle_cfg.season_days,
            oracle.odr,
            oracle.flood_steps
        ),
    )
}

// ---------------------------------------------------------------------------------------------
// 9. Decision latency

fn criterion_9(models: &mut Option<Models>) -> Outcome {
    let config = ScenarioConfig::default();
    let w = scenario_weather(&config).map_err(|e| e.to_string())?;
    let (hist, _) = training_history(&config, &w).map_err(|e| e.to_string())?;
    let models = match models.take() {
        Some(m) => m,
        None => forecast::fit(&hist, &config.forecast).map_err(|e| e.to_string())?,
    };
    let forecaster = LearnedForecaster {
        models,
        params: config.sim,
    };
    let mpc = MpcConfig::default();
    let h = mpc.horizon();
    let flood = hist.column(Variate::Flood);
    // Decision times: the end of training (idle field) and the latest point mid-flood, where the
    // plan space is largest.
    let mid_flood = (h..hist.len())
        .rev()
        .find(|&o| flood[o - 1] > 0.5 && flood[o - 37..o].iter().all(|&f| f > 0.5))
        .ok_or("no flood in training history")?;
    let mut worst = Duration::ZERO;
    let mut details = Vec::new();
    for origin in [hist.len(), mid_flood] {
        let recent = hist.slice(0, origin).unwrap();
        let clue = w.slice(origin, h).unwrap();
        let input = ControlInput {
            recent: &recent,
            weather_clue: &clue,
            state: None,
        };
        let start = Instant::now();
        let d = control_step(&input, &forecaster, &mpc).map_err(|e| e.to_string())?;
        let took = start.elapsed();
        worst = worst.max(took);
        details.push(format!(
            "{} plans ({} feasible) in {:.2} s",
            d.evaluated_count,
            d.feasible_count,
            took.as_secs_f64()
        ));
    }
    check(worst <= Duration::from_secs(60), format!("paper-scale control_step: {}", details.join("; ")))
}

// ---------------------------------------------------------------------------------------------
// 10. Determinism and persistence

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_aquamar")
}

fn run(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "aquamar {} failed ({}): {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

/// Every regular file under `dir`, with manifests stripped of their wall-clock time.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let mut bytes = fs::read(&p).unwrap();
            if p.to_string_lossy().ends_with("manifest.json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("wall_clock_secs");
                bytes = serde_json::to_vec(&v).unwrap();
            }
            out.push((p.strip_prefix(dir).unwrap().to_path_buf(), bytes));
        }
    }
    out.sort();
    out
}

const SMALL_FORECAST: &str = r#"
[backbone]
input_len = 144
horizon = 144
[causal]
backtest_stride = 36
min_windows = 10
[causal.lag_overrides]
flood = 72
precip = 36
"#;

const SMALL_MPC: &str = r#"
replan_every = 6
[constraints]
horizon = 144
min_flood = 12
max_flood = 36
min_idle = 36
quantum = 6
max_flood_runs = 1
"#;

fn write_fixtures(dir: &Path) -> Result<(), String> {
    let err = |e: aquamar::Error| e.to_string();
    let params = SimParams::default();
    let cfg = ScenarioConfig {
        training_days: 10,
        controllers: vec![ControllerKind::Never],
        ..Default::default()
    };
    let w = scenario_weather(&cfg).map_err(err)?;
    let (hist, _) = training_history(&cfg, &w).map_err(err)?;
    let n = hist.len();
    let mut buf = Vec::new();
    history::write_csv(&hist, &mut buf).map_err(err)?;
    fs::write(dir.join("history.csv"), &buf).unwrap();
    let mut buf = Vec::new();
    weather::write_csv(&w.slice(n, 144).unwrap(), &mut buf).map_err(err)?;
    fs::write(dir.join("clue.csv"), &buf).unwrap();
    let mut buf = Vec::new();
    weather::write_csv(&w.slice(0, 288).unwrap(), &mut buf).map_err(err)?;
    fs::write(dir.join("weather.csv"), &buf).unwrap();
    let plan = FloodingPlan::new((0..288).map(|i| (60..132).contains(&i)).collect()).unwrap();
    fs::write(dir.join("plan.txt"), format!("{plan}\n")).unwrap();
    fs::write(dir.join("sim.params"), params.to_kv()).unwrap();
    fs::write(dir.join("forecast.toml"), SMALL_FORECAST).unwrap();
    fs::write(dir.join("mpc.toml"), SMALL_MPC).unwrap();
    let scenario = format!(
        "seed = 11\nseason_days = 2\ntraining_days = 10\ncontrollers = [\"mpc\", \"weekly\", \"never\"]\n\
         [forecast.backbone]\ninput_len = 144\nhorizon = 144\n\
         [forecast.causal]\nbacktest_stride = 36\nmin_windows = 10\n\
         [forecast.causal.lag_overrides]\nflood = 72\nprecip = 36\n\
         [mpc]\nreplan_every = 6\n[mpc.constraints]\nhorizon = 144\nmin_flood = 12\nmax_flood = 36\n\
         min_idle = 36\nquantum = 6\nmax_flood_runs = 1\n"
    );
    fs::write(dir.join("scenario.toml"), scenario).unwrap();
    Ok(())
}

fn cli_round(dir: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>, String> {
    let p = |f: &str| dir.join(f).to_string_lossy().into_owned();
    let out = dir.join("out");
    let o = |f: &str| out.join(f).to_string_lossy().into_owned();
    let _ = fs::remove_dir_all(&out);
    fs::create_dir_all(&out).unwrap();
    let mut stdout = Vec::new();
    stdout.push(run(&["simulate", "--params", &p("sim.params"), "--plan", &p("plan.txt"), "--weather", &p("weather.csv"), "--out", &o("traj.csv")])?);
    stdout.push(run(&["train", "--history", &p("history.csv"), "--config", &p("forecast.toml"), "--out", &o("model.aqmr")])?);
    stdout.push(run(&[
        "control", "--model", &o("model.aqmr"), "--history", &p("history.csv"), "--weather", &p("clue.csv"),
        "--params", &p("sim.params"), "--config", &p("mpc.toml"), "--out", &o("decisions.jsonl"),
    ])?);
    stdout.push(run(&["season", "--scenario", &p("scenario.toml"), "--seed", "12", "--out", &o("season")])?);
    stdout.push(run(&["enumerate", "--horizon", "48", "--min-flood", "6", "--max-flood", "12", "--min-idle", "6", "--quantum", "6", "--max-flood-runs", "0", "--out", &o("plans.txt")])?);
    stdout.push(run(&["enumerate", "--count"])?);
    let mut snap = snapshot(&out);
    for (i, s) in stdout.into_iter().enumerate() {
        snap.push((PathBuf::from(format!("stdout-{i}")), s));
    }
    Ok(snap)
}

fn criterion_10(models: &Option<Models>) -> Outcome {
    let mut details = Vec::new();
    let models = match models {
        Some(m) => m.clone(),
        None => {
            let c = ScenarioConfig::default();
            let w = scenario_weather(&c).map_err(|e| e.to_string())?;
            forecast::fit(&training_history(&c, &w).map_err(|e| e.to_string())?.0, &c.forecast).map_err(|e| e.to_string())?
        }
    };
    let bytes = forecast::save(&models).map_err(|e| e.to_string())?;
    let back = forecast::load(&bytes).map_err(|e| e.to_string())?;
    let again = forecast::save(&back).map_err(|e| e.to_string())?;
    let round_trip = back == models && again == bytes;
    details.push(format!("model save/load exact: {round_trip} ({} bytes)", bytes.len()));

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_fixtures(dir.path())?;
    let first = cli_round(dir.path())?;
    let second = cli_round(dir.path())?;
    let same = first == second;
    let differing: Vec<String> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.display().to_string())
        .collect();
    details.push(format!(
        "CLI simulate/train/control/season/enumerate rerun: {} files byte-identical: {same}{}",
        first.len(),
        if differing.is_empty() { String::new() } else { format!(" (differ: {})", differing.join(", ")) }
    ));
    check(round_trip && same && first.len() == second.len(), details.join("; "))
}

// ---------------------------------------------------------------------------------------------

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(format!(
            "panicked: {}",
            p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default()
        )),
    }
}

fn main() {
    let mut models: Option<Models> = None;
    let mut failed = 0;
    let mut report = |n: usize, r: Outcome| {
        match &r {
            Ok(d) => println!("criterion {n}: PASS — {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n}: FAIL — {d}");
            }
        }
    };
    report(1, guarded(criterion_1));
    report(2, guarded(criterion_2));
    report(3, guarded(criterion_3));
    report(4, guarded(criterion_4));
    report(5, guarded(criterion_5));
    report(6, guarded(criterion_6));
    report(7, guarded(criterion_7));
    report(8, guarded(|| criterion_8(&mut models)));
    let for_10 = models.clone();
    report(9, guarded(|| criterion_9(&mut models)));
    report(10, guarded(|| criterion_10(&for_10)));
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 10 acceptance criteria passed");
}
