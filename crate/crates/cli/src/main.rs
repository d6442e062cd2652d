use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use aquamar::forecast::{self, ForecastConfig, FORMAT_VERSION};
use aquamar::mpc::{control_step, write_decision_log, ControlInput, DecisionRecord, LearnedForecaster, MpcConfig};
use aquamar::planner::{count_plans, for_each_plan, parse_plans, InitialRunState, PlanConstraints};
use aquamar::scenario::{run_scenario, ScenarioConfig};
use aquamar::sim::{simulate, write_trajectory_csv, SimParams, SimState};
use aquamar::weather::{self, WeatherSeries};
use aquamar::{history, Error};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

mod manifest;

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "aquamar", version, about = "Flood scheduling for managed aquifer recharge")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the soil simulator over a plan and a weather series.
    Simulate(SimulateArgs),
    /// Fit the forecaster to a sensor history and backtest it.
    Train(TrainArgs),
    /// Make one flooding decision from a model, recent history and a weather forecast.
    Control(ControlArgs),
    /// Run a seeded closed-loop season for every configured controller.
    Season(SeasonArgs),
    /// List or count the admissible flooding plans.
    Enumerate(EnumerateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulator parameter file (key = value); defaults apply to missing keys.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Plan file holding one 0/1 line as long as the weather series.
    #[arg(long)]
    plan: PathBuf,
    /// Weather CSV.
    #[arg(long)]
    weather: PathBuf,
    /// Initial state file (key = value); field capacity and atmospheric oxygen otherwise.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Trajectory CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Sensor history CSV.
    #[arg(long)]
    history: PathBuf,
    /// Forecast configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model artifact to write. The backtest report goes to stdout.
    #[arg(long)]
    out: PathBuf,
    /// Number of most recent backtest windows to report.
    #[arg(long, default_value_t = 50)]
    windows: usize,
}

#[derive(Args)]
struct ControlArgs {
    /// Model artifact written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Recent sensor history CSV, ending at the decision time.
    #[arg(long)]
    history: PathBuf,
    /// Weather forecast starting at the decision time: CSV, or JSON forecast document.
    #[arg(long)]
    weather: PathBuf,
    /// Simulator parameter file used for the water-balance objective.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Controller configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Append the decision as a JSON line to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SeasonArgs {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnumerateArgs {
    /// Constraints file (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Plan length, steps.
    #[arg(long)]
    horizon: Option<usize>,
    /// Shortest flood run, steps.
    #[arg(long)]
    min_flood: Option<usize>,
    /// Longest flood run, steps.
    #[arg(long)]
    max_flood: Option<usize>,
    /// Shortest idle gap between floods, steps.
    #[arg(long)]
    min_idle: Option<usize>,
    /// Run boundaries fall on multiples of this many steps.
    #[arg(long)]
    quantum: Option<usize>,
    /// Cap on flood runs per horizon; 0 removes the cap.
    #[arg(long)]
    max_flood_runs: Option<usize>,
    /// Valve state entering the horizon: `idle`, `idle:N` or `flooding:N`.
    #[arg(long, default_value = "idle")]
    init: String,
    /// Print the number of plans instead of listing them.
    #[arg(long)]
    count: bool,
    /// Write the listing or count here; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit status: 1 for validation and usage errors, 2 for I/O errors.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Io(_)) { 2 } else { 1 };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| io_failure(path, e))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn finish(mut w: impl Write, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| io_failure(path, e))
}

fn with_context(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| {
        let f = Failure::from(e);
        Failure {
            code: f.code,
            message: format!("{}: {}", path.display(), f.message),
        }
    }
}

fn load_params(path: Option<&Path>) -> CliResult<SimParams> {
    match path {
        Some(p) => SimParams::from_kv(&read_text(p)?).map_err(with_context(p)),
        None => Ok(SimParams::default()),
    }
}

fn load_toml<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        Some(p) => toml_from_str(&read_text(p)?).map_err(with_context(p)),
        None => Ok(T::default()),
    }
}

fn toml_from_str<T: serde::de::DeserializeOwned>(text: &str) -> aquamar::Result<T> {
    toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

fn load_weather(path: &Path) -> CliResult<WeatherSeries> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        weather::load_forecast_json(&read_text(path)?).map_err(with_context(path))
    } else {
        weather::load_csv(open(path)?).map_err(with_context(path))
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn cmd_simulate(a: &SimulateArgs, m: &mut RunManifest) -> CliResult<()> {
    let params = load_params(a.params.as_deref())?;
    let weather = load_weather(&a.weather)?;
    let plans = parse_plans(&read_text(&a.plan)?).map_err(with_context(&a.plan))?;
    let [plan] = plans.as_slice() else {
        return Err(usage(format!(
            "{}: expected exactly one plan line, found {}",
            a.plan.display(),
            plans.len()
        )));
    };
    let initial = match &a.state {
        Some(p) => SimState::from_kv(&read_text(p)?).map_err(with_context(p))?,
        None => SimState::at_field_capacity(&params),
    };
    let traj = simulate(&initial, plan, &weather, &params)?;
    m.input("params", a.params.as_deref());
    m.input("plan", Some(&a.plan));
    m.input("weather", Some(&a.weather));
    m.input("state", a.state.as_deref());
    match &a.out {
        Some(out) => {
            let mut w = create(out)?;
            write_trajectory_csv(weather.axis(), plan.steps(), &traj, &mut w)?;
            finish(w, out)?;
            m.output(out);
        }
        None => write_trajectory_csv(weather.axis(), plan.steps(), &traj, io::stdout().lock())?,
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainReport {
    history_steps: usize,
    periods: Vec<(String, Vec<usize>)>,
    causal_edges: usize,
    backtest: forecast::BacktestReport,
}

fn cmd_train(a: &TrainArgs, m: &mut RunManifest) -> CliResult<()> {
    let config: ForecastConfig = load_toml(a.config.as_deref())?;
    let hist = history::load_csv(open(&a.history)?).map_err(with_context(&a.history))?;
    let models = forecast::fit(&hist, &config)?;
    let frame = aquamar::validate::validate_frame(&hist)?.frame;
    let backtest = forecast::backtest(&models, &frame, config.causal.backtest_stride, Some(a.windows))?;
    let report = TrainReport {
        history_steps: hist.len(),
        periods: aquamar::Variate::ALL
            .iter()
            .map(|&v| (v.column_name().to_string(), models.backbone.periods(v)))
            .collect(),
        causal_edges: models.causal.edges.len(),
        backtest,
    };
    forecast::save_to(&models, &a.out).map_err(with_context(&a.out))?;
    m.input("history", Some(&a.history));
    m.input("config", a.config.as_deref());
    m.output(&a.out);
    print!("{}", to_json(&report));
    Ok(())
}

fn cmd_control(a: &ControlArgs, m: &mut RunManifest) -> CliResult<()> {
    let models = forecast::load_from(&a.model).map_err(with_context(&a.model))?;
    let params = load_params(a.params.as_deref())?;
    let config: MpcConfig = load_toml(a.config.as_deref())?;
    let recent = history::load_csv(open(&a.history)?).map_err(with_context(&a.history))?;
    let clue = load_weather(&a.weather)?;
    let h = config.horizon();
    if clue.len() < h || models.horizon() != h {
        return Err(Error::LengthMismatch {
            what: "weather forecast / model horizon vs plan horizon",
            expected: h,
            actual: clue.len().min(models.horizon()),
        }
        .into());
    }
    let clue = clue.slice(0, h)?;
    let forecaster = LearnedForecaster { models, params };
    let input = ControlInput {
        recent: &recent,
        weather_clue: &clue,
        state: None,
    };
    let decision = control_step(&input, &forecaster, &config)?;
    let record = DecisionRecord::from(&decision);
    m.input("model", Some(&a.model));
    m.input("history", Some(&a.history));
    m.input("weather", Some(&a.weather));
    m.input("params", a.params.as_deref());
    m.input("config", a.config.as_deref());
    if let Some(out) = &a.out {
        let f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(out)
            .map_err(|e| io_failure(out, e))?;
        let mut w = BufWriter::new(f);
        write_decision_log(std::slice::from_ref(&record), &mut w)?;
        finish(w, out)?;
        m.output(out);
    }
    print!("{}", to_json(&record));
    Ok(())
}

fn cmd_season(a: &SeasonArgs, m: &mut RunManifest) -> CliResult<()> {
    let mut config = match &a.scenario {
        Some(p) => ScenarioConfig::from_toml(&read_text(p)?).map_err(with_context(p))?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    m.input("scenario", a.scenario.as_deref());
    m.seed(config.seed);
    let outcome = run_scenario(&config)?;
    fs::create_dir_all(&a.out).map_err(|e| io_failure(&a.out, e))?;

    let summaries: Vec<_> = outcome.seasons.iter().map(|s| &s.summary).collect();
    let report_path = a.out.join("report.json");
    let mut w = create(&report_path)?;
    w.write_all(to_json(&summaries).as_bytes()).map_err(|e| io_failure(&report_path, e))?;
    finish(w, &report_path)?;
    m.output(&report_path);

    for s in &outcome.seasons {
        let name = &s.summary.controller;
        let plot = a.out.join(format!("plot_{name}.csv"));
        let mut w = create(&plot)?;
        s.write_plot_csv(&mut w)?;
        finish(w, &plot)?;
        m.output(&plot);
        if !s.decisions.is_empty() {
            let log = a.out.join(format!("decisions_{name}.jsonl"));
            let mut w = create(&log)?;
            write_decision_log(&s.decisions, &mut w)?;
            finish(w, &log)?;
            m.output(&log);
        }
    }
    if let Some(models) = &outcome.models {
        let path = a.out.join("model.aqmr");
        forecast::save_to(models, &path).map_err(with_context(&path))?;
        m.output(&path);
    }
    print!("{}", to_json(&summaries));
    Ok(())
}

fn parse_init(s: &str) -> CliResult<InitialRunState> {
    let bad = || usage(format!("invalid --init '{s}': expected idle, idle:N or flooding:N"));
    let (mode, n) = match s.split_once(':') {
        Some((mode, n)) => (mode, Some(n.parse::<usize>().map_err(|_| bad())?)),
        None => (s, None),
    };
    match (mode, n) {
        ("idle", None) => Ok(InitialRunState::FRESH),
        ("idle", Some(n)) => Ok(InitialRunState::Idle(n)),
        ("flooding", Some(n)) if n > 0 => Ok(InitialRunState::Flooding(n)),
        _ => Err(bad()),
    }
}

fn cmd_enumerate(a: &EnumerateArgs, m: &mut RunManifest) -> CliResult<()> {
    let mut c = match &a.config {
        Some(p) => toml_from_str::<PlanConstraints>(&read_text(p)?).map_err(with_context(p))?,
        None => PlanConstraints::paper_scale(),
    };
    for (slot, flag) in [
        (&mut c.horizon, a.horizon),
        (&mut c.min_flood, a.min_flood),
        (&mut c.max_flood, a.max_flood),
        (&mut c.min_idle, a.min_idle),
        (&mut c.quantum, a.quantum),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    if let Some(r) = a.max_flood_runs {
        c.max_flood_runs = (r > 0).then_some(r);
    }
    let init = parse_init(&a.init)?;
    c.validate()?;
    m.input("config", a.config.as_deref());
    let sink: Box<dyn Write> = match &a.out {
        Some(out) => Box::new(create(out)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let target = a.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut w = sink;
    if a.count {
        let n = count_plans(&c, init)?;
        writeln!(w, "{n}").map_err(|e| io_failure(&target, e))?;
    } else {
        let mut err = None;
        let mut line = String::with_capacity(c.horizon + 1);
        for_each_plan(&c, init, |steps| {
            if err.is_some() {
                return;
            }
            line.clear();
            line.extend(steps.iter().map(|&b| if b { '1' } else { '0' }));
            line.push('\n');
            if let Err(e) = w.write_all(line.as_bytes()) {
                err = Some(e);
            }
        })?;
        if let Some(e) = err {
            return Err(io_failure(&target, e));
        }
    }
    finish(w, &target)?;
    if let Some(out) = &a.out {
        m.output(out);
    }
    Ok(())
}

/// Size the rayon pool from `AQUAMAR_THREADS` when set.
fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("AQUAMAR_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("AQUAMAR_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| usage(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let started = Instant::now();
    let (name, manifest_path) = match &cli.command {
        Command::Simulate(a) => ("simulate", a.out.as_ref().map(|o| manifest::beside(o))),
        Command::Train(a) => ("train", Some(manifest::beside(&a.out))),
        Command::Control(a) => ("control", a.out.as_ref().map(|o| manifest::beside(o))),
        Command::Season(a) => ("season", Some(a.out.join("manifest.json"))),
        Command::Enumerate(a) => ("enumerate", a.out.as_ref().map(|o| manifest::beside(o))),
    };
    let mut m = RunManifest::new(name, FORMAT_VERSION);
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &mut m)?,
        Command::Train(a) => cmd_train(a, &mut m)?,
        Command::Control(a) => cmd_control(a, &mut m)?,
        Command::Season(a) => cmd_season(a, &mut m)?,
        Command::Enumerate(a) => cmd_enumerate(a, &mut m)?,
    }
    if let Some(path) = manifest_path {
        m.finish(started.elapsed());
        let mut w = create(&path)?;
        w.write_all(to_json(&m).as_bytes()).map_err(|e| io_failure(&path, e))?;
        finish(w, &path)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
