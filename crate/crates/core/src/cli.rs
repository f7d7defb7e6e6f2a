//! Command-line front end: run configuration and CSV output.
//!
//! A configuration file holds one `key = value` per line; `#` starts a
//! comment. Command-line flags override file values. Preset scenarios fill
//! every market field; `scenario = custom` reads them from the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::error::GameError;
use crate::model::{ClaimModel, ExitPayoff, PiecewiseLinear, RetentionKind, RunningPayoff};
use crate::scenario::{MarketParams, Scenario};
use crate::simulator::{default_horizon, Simulator};
use crate::solver::{GameSolver, Solution, SolverSettings, UpdateOrder};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Game(GameError),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Game(GameError::NotConverged { .. }) | CliError::NotConverged(_) => 2,
            CliError::Game(_) => 1,
            CliError::Io { .. } => 3,
        }
    }
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        CliError::Game(e)
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioChoice {
    Preset(Scenario),
    Custom(Box<MarketParams>),
}

impl ScenarioChoice {
    pub fn name(&self) -> &str {
        match self {
            ScenarioChoice::Preset(sc) => sc.name(),
            ScenarioChoice::Custom(_) => "custom",
        }
    }

    pub fn params(&self) -> MarketParams {
        match self {
            ScenarioChoice::Preset(sc) => sc.params(),
            ScenarioChoice::Custom(p) => (**p).clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioChoice,
    pub grid_n: usize,
    pub control_m: usize,
    /// Tolerance of the policy evaluation sweeps.
    pub tol: f64,
    /// Stopping level of the policy iteration.
    pub epsilon: f64,
    pub max_rounds: usize,
    pub max_sweeps: usize,
    pub mc_paths: usize,
    pub seed: u64,
    /// Censoring horizon; derived from the payoff bound when absent.
    pub t_max: Option<f64>,
    /// Initial states for the Monte Carlo check; 11 equispaced interior points when absent.
    pub mc_x0: Option<Vec<f64>>,
    /// Initial state for the dynamic-programming check; the midpoint when absent.
    pub dpp_x0: Option<f64>,
    pub dpp_horizons: Vec<f64>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self {
            scenario: ScenarioChoice::Preset(Scenario::PropVarExp),
            grid_n: s.grid_points,
            control_m: s.control_points,
            tol: s.tol,
            epsilon: s.epsilon,
            max_rounds: s.max_rounds,
            max_sweeps: s.max_sweeps,
            mc_paths: 100_000,
            seed: 20_240_101,
            t_max: None,
            mc_x0: None,
            dpp_x0: None,
            dpp_horizons: vec![0.5, 1.0, 2.0],
            out: PathBuf::from("out"),
        }
    }
}

/// Market fields of a custom scenario; the first twelve are required.
const MARKET_KEYS: [&str; 18] = [
    "lower",
    "upper",
    "discount",
    "intensity1",
    "intensity2",
    "claims1",
    "claims2",
    "loading1",
    "loading2",
    "reinsurance_loading1",
    "reinsurance_loading2",
    "retention",
    "base_rate1",
    "base_rate2",
    "retention_cap1",
    "retention_cap2",
    "running",
    "exit",
];

const RUN_KEYS: [&str; 14] = [
    "scenario",
    "grid_n",
    "control_m",
    "tol",
    "epsilon",
    "max_rounds",
    "max_sweeps",
    "mc_paths",
    "seed",
    "t_max",
    "mc_x0",
    "dpp_x0",
    "dpp_horizons",
    "out",
];

/// Splits `key = value` lines into a map, rejecting unknown and repeated keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected `key = value`, got `{line}`", i + 1)))?;
        let key = key.trim();
        if !RUN_KEYS.contains(&key) && !MARKET_KEYS.contains(&key) {
            return Err(config_err(format!("line {}: unknown key `{key}`", i + 1)));
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(config_err(format!("line {}: key `{key}` given twice", i + 1)));
        }
    }
    Ok(map)
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| config_err(format!("`{key}`: cannot parse `{value}` as a number")))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').map(|v| number(key, v.trim())).collect()
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(config_err(format!("`{key}` must be positive and finite, got {v}")))
    }
}

fn parse_claims(key: &str, value: &str) -> Result<ClaimModel, CliError> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    let claims = match parts.as_slice() {
        ["exponential", mean] => ClaimModel::exponential(number(key, mean)?),
        ["pareto", shape, scale] => ClaimModel::pareto_ii(number(key, shape)?, number(key, scale)?),
        _ => {
            return Err(config_err(format!(
                "`{key}`: expected `exponential <mean>` or `pareto <shape> <scale>`, got `{value}`"
            )))
        }
    };
    claims.map_err(|e| config_err(format!("`{key}`: {e}")))
}

fn format_claims(c: &ClaimModel) -> String {
    match c {
        ClaimModel::Exponential { mean } => format!("exponential {mean}"),
        ClaimModel::ParetoII { shape, scale } => format!("pareto {shape} {scale}"),
    }
}

fn parse_table(key: &str, items: &[&str]) -> Result<PiecewiseLinear, CliError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for item in items {
        let (x, y) = item
            .split_once(':')
            .ok_or_else(|| config_err(format!("`{key}`: table entries are `x:y`, got `{item}`")))?;
        xs.push(number(key, x)?);
        ys.push(number(key, y)?);
    }
    PiecewiseLinear::new(xs, ys).map_err(|e| config_err(format!("`{key}`: {e}")))
}

fn format_table(t: &PiecewiseLinear) -> String {
    let items: Vec<String> = t.knots().map(|(x, y)| format!("{x}:{y}")).collect();
    format!("table {}", items.join(" "))
}

fn parse_running(value: &str) -> Result<RunningPayoff, CliError> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    match parts.as_slice() {
        ["constant", c] => Ok(RunningPayoff::Constant(number("running", c)?)),
        ["table", items @ ..] => Ok(RunningPayoff::Table(parse_table("running", items)?)),
        _ => Err(config_err(format!("`running`: expected `constant <c>` or `table x:y ...`, got `{value}`"))),
    }
}

fn format_running(r: &RunningPayoff) -> String {
    match r {
        RunningPayoff::Constant(c) => format!("constant {c}"),
        RunningPayoff::Table(t) => format_table(t),
    }
}

fn parse_exit(value: &str) -> Result<ExitPayoff, CliError> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    match parts.as_slice() {
        ["indicator"] => Ok(ExitPayoff::UpperIndicator),
        ["constant", c] => Ok(ExitPayoff::Constant(number("exit", c)?)),
        ["table", items @ ..] => Ok(ExitPayoff::Table(parse_table("exit", items)?)),
        _ => Err(config_err(format!(
            "`exit`: expected `indicator`, `constant <c>` or `table x:y ...`, got `{value}`"
        ))),
    }
}

fn format_exit(e: &ExitPayoff) -> String {
    match e {
        ExitPayoff::UpperIndicator => "indicator".to_string(),
        ExitPayoff::Constant(c) => format!("constant {c}"),
        ExitPayoff::Table(t) => format_table(t),
    }
}

fn parse_market(map: &BTreeMap<String, String>) -> Result<MarketParams, CliError> {
    if let Some(key) = MARKET_KEYS[..12].iter().find(|k| !map.contains_key(**k)) {
        return Err(config_err(format!("custom scenario is missing required field `{key}`")));
    }
    let req = |key: &str| {
        map.get(key)
            .map(String::as_str)
            .ok_or_else(|| config_err(format!("custom scenario is missing required field `{key}`")))
    };
    let opt = |key: &str| -> Result<Option<f64>, CliError> {
        map.get(key).map(|v| number(key, v)).transpose()
    };
    let retention = match req("retention")? {
        "proportional" => RetentionKind::Proportional,
        "excess-of-loss" => RetentionKind::ExcessOfLoss,
        other => {
            return Err(config_err(format!(
                "`retention`: expected `proportional` or `excess-of-loss`, got `{other}`"
            )))
        }
    };
    let params = MarketParams {
        lower: number("lower", req("lower")?)?,
        upper: number("upper", req("upper")?)?,
        discount: number("discount", req("discount")?)?,
        intensity: [number("intensity1", req("intensity1")?)?, number("intensity2", req("intensity2")?)?],
        claims: [parse_claims("claims1", req("claims1")?)?, parse_claims("claims2", req("claims2")?)?],
        loading: [number("loading1", req("loading1")?)?, number("loading2", req("loading2")?)?],
        reinsurance_loading: [
            number("reinsurance_loading1", req("reinsurance_loading1")?)?,
            number("reinsurance_loading2", req("reinsurance_loading2")?)?,
        ],
        retention,
        base_rate: [opt("base_rate1")?, opt("base_rate2")?],
        retention_cap: [opt("retention_cap1")?, opt("retention_cap2")?],
        running: map.get("running").map(|v| parse_running(v)).transpose()?.unwrap_or(RunningPayoff::Constant(0.0)),
        exit: map.get("exit").map(|v| parse_exit(v)).transpose()?.unwrap_or(ExitPayoff::UpperIndicator),
    };
    params.build().map_err(|e| config_err(e.to_string()))?;
    Ok(params)
}

fn write_market(p: &MarketParams, s: &mut String) {
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    put("lower", p.lower.to_string());
    put("upper", p.upper.to_string());
    put("discount", p.discount.to_string());
    for i in 0..2 {
        let n = i + 1;
        put(&format!("intensity{n}"), p.intensity[i].to_string());
        put(&format!("claims{n}"), format_claims(&p.claims[i]));
        put(&format!("loading{n}"), p.loading[i].to_string());
        put(&format!("reinsurance_loading{n}"), p.reinsurance_loading[i].to_string());
        if let Some(c) = p.base_rate[i] {
            put(&format!("base_rate{n}"), c.to_string());
        }
        if let Some(m) = p.retention_cap[i] {
            put(&format!("retention_cap{n}"), m.to_string());
        }
    }
    let retention = match p.retention {
        RetentionKind::Proportional => "proportional",
        RetentionKind::ExcessOfLoss => "excess-of-loss",
    };
    put("retention", retention.to_string());
    put("running", format_running(&p.running));
    put("exit", format_exit(&p.exit));
}

/// Builds a validated configuration from a key-value map.
pub fn config_from_pairs(map: &BTreeMap<String, String>) -> Result<RunConfig, CliError> {
    let mut c = RunConfig::default();
    let scenario = map.get("scenario").map(String::as_str).unwrap_or("prop-var-exp");
    c.scenario = if scenario == "custom" {
        ScenarioChoice::Custom(Box::new(parse_market(map)?))
    } else {
        let sc = scenario.parse::<Scenario>().map_err(|_| {
            config_err(format!(
                "unknown scenario `{scenario}`; expected prop-var-exp, xl-exp-exp, xl-exp-pareto or custom"
            ))
        })?;
        if let Some(key) = MARKET_KEYS.iter().find(|k| map.contains_key(**k)) {
            return Err(config_err(format!("`{key}` can only be set with `scenario = custom`")));
        }
        ScenarioChoice::Preset(sc)
    };
    let get = |key: &str| map.get(key).map(String::as_str);
    if let Some(v) = get("grid_n") {
        c.grid_n = number("grid_n", v)?;
    }
    if let Some(v) = get("control_m") {
        c.control_m = number("control_m", v)?;
    }
    if let Some(v) = get("tol") {
        c.tol = positive("tol", number("tol", v)?)?;
    }
    if let Some(v) = get("epsilon") {
        c.epsilon = positive("epsilon", number("epsilon", v)?)?;
    }
    if let Some(v) = get("max_rounds") {
        c.max_rounds = number("max_rounds", v)?;
    }
    if let Some(v) = get("max_sweeps") {
        c.max_sweeps = number("max_sweeps", v)?;
    }
    if let Some(v) = get("mc_paths") {
        c.mc_paths = number("mc_paths", v)?;
    }
    if let Some(v) = get("seed") {
        c.seed = number("seed", v)?;
    }
    if let Some(v) = get("t_max") {
        c.t_max = Some(positive("t_max", number("t_max", v)?)?);
    }
    if let Some(v) = get("mc_x0") {
        c.mc_x0 = Some(list("mc_x0", v)?);
    }
    if let Some(v) = get("dpp_x0") {
        c.dpp_x0 = Some(number("dpp_x0", v)?);
    }
    if let Some(v) = get("dpp_horizons") {
        c.dpp_horizons = list("dpp_horizons", v)?;
        for &t in &c.dpp_horizons {
            positive("dpp_horizons", t)?;
        }
    }
    if let Some(v) = get("out") {
        c.out = PathBuf::from(v);
    }
    c.settings().validate().map_err(|e| config_err(e.to_string()))?;
    if c.mc_paths < 2 {
        return Err(config_err(format!("`mc_paths` must be at least 2, got {}", c.mc_paths)));
    }
    Ok(c)
}

impl RunConfig {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            grid_points: self.grid_n,
            control_points: self.control_m,
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            epsilon: self.epsilon,
            max_rounds: self.max_rounds,
        }
    }
}

/// Parses a configuration file's text.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    config_from_pairs(&parse_pairs(text)?)
}

/// Serializes a configuration so that [`parse_config`] returns it unchanged.
pub fn write_config(c: &RunConfig) -> String {
    let mut s = String::from("# reinsurance-game run configuration\n");
    let _ = writeln!(s, "scenario = {}", c.scenario.name());
    if let ScenarioChoice::Custom(p) = &c.scenario {
        write_market(p, &mut s);
    }
    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
    let _ = writeln!(s, "grid_n = {}", c.grid_n);
    let _ = writeln!(s, "control_m = {}", c.control_m);
    let _ = writeln!(s, "tol = {}", c.tol);
    let _ = writeln!(s, "epsilon = {}", c.epsilon);
    let _ = writeln!(s, "max_rounds = {}", c.max_rounds);
    let _ = writeln!(s, "max_sweeps = {}", c.max_sweeps);
    let _ = writeln!(s, "mc_paths = {}", c.mc_paths);
    let _ = writeln!(s, "seed = {}", c.seed);
    if let Some(t) = c.t_max {
        let _ = writeln!(s, "t_max = {t}");
    }
    if let Some(x) = &c.mc_x0 {
        let _ = writeln!(s, "mc_x0 = {}", join(x));
    }
    if let Some(x) = c.dpp_x0 {
        let _ = writeln!(s, "dpp_x0 = {x}");
    }
    let _ = writeln!(s, "dpp_horizons = {}", join(&c.dpp_horizons));
    let _ = writeln!(s, "out = {}", c.out.display());
    s
}

#[derive(Debug, Parser)]
#[command(name = "reinsurance-game", version, about = "Values and equilibrium reinsurance controls of a two-insurer zero-sum game")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve both update orders; write value and policy tables plus a report.
    Solve(RunArgs),
    /// Check the solver against Monte Carlo; write mc_validation.csv and dpp.csv.
    Validate(RunArgs),
    /// Report the largest gap between upper and lower value.
    Gap(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Preset name, or `custom` with market fields from --config.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long)]
    pub control_m: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_rounds: Option<usize>,
    #[arg(long)]
    pub mc_paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with code 2 when policy iteration stops without converging.
    #[arg(long)]
    pub strict: bool,
}

/// Reads the configuration file, if any, and applies flag overrides.
pub fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut map = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            parse_pairs(&text)?
        }
        None => BTreeMap::new(),
    };
    let mut set = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            map.insert(key.to_string(), v);
        }
    };
    set("scenario", args.scenario.clone());
    set("grid_n", args.grid_n.map(|v| v.to_string()));
    set("control_m", args.control_m.map(|v| v.to_string()));
    set("tol", args.tol.map(|v| v.to_string()));
    set("epsilon", args.epsilon.map(|v| v.to_string()));
    set("max_rounds", args.max_rounds.map(|v| v.to_string()));
    set("mc_paths", args.mc_paths.map(|v| v.to_string()));
    set("seed", args.seed.map(|v| v.to_string()));
    set("t_max", args.t_max.map(|v| v.to_string()));
    set("out", args.out.as_ref().map(|p| p.display().to_string()));
    config_from_pairs(&map)
}

/// Files written so far; removed again if a later step fails.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        match fs::write(&path, contents) {
            Ok(()) => {
                self.written.push(path);
                Ok(())
            }
            Err(source) => {
                self.discard();
                Err(CliError::Io { path, source })
            }
        }
    }

    fn discard(&mut self) {
        for p in self.written.drain(..) {
            let _ = fs::remove_file(p);
        }
    }
}

fn control_token(u: f64) -> String {
    if u == f64::INFINITY {
        "inf".to_string()
    } else {
        u.to_string()
    }
}

fn strict_check(strict: bool, solutions: &[&Solution]) -> Result<(), CliError> {
    if let Some(s) = solutions.iter().find(|s| !s.report.converged).filter(|_| strict) {
        return Err(CliError::NotConverged(format!(
            "{:?} order stopped after {} rounds (value change {:e}, policy change {:e})",
            s.report.order, s.report.rounds, s.report.value_change, s.report.policy_change
        )));
    }
    Ok(())
}

/// Summary of a completed run, printed by the binary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub lines: Vec<String>,
    pub converged: bool,
}

/// Solves both orders and writes the value and policy tables plus `report.txt`.
pub fn run_solve(config: &RunConfig, strict: bool) -> Result<RunSummary, CliError> {
    let spec = config.scenario.params().build()?;
    let solver = GameSolver::new(&spec, config.settings())?;
    let gap = solver.upper_lower_gap()?;
    let grid = solver.grid();

    let mut value = String::from("x,v_lower,v_upper,gap\n");
    let mut policy = String::from("x,u1,u2\n");
    for (k, x) in grid.xs().enumerate() {
        let lo = gap.lower.value.values()[k];
        let up = gap.upper.value.values()[k];
        let _ = writeln!(value, "{x},{lo},{up},{}", (up - lo).abs());
        let (u1, u2) = (gap.upper.u1.controls()[k], gap.upper.u2.controls()[k]);
        let _ = writeln!(policy, "{x},{},{}", control_token(u1), control_token(u2));
    }
    let mut report = format!("scenario = {}\ngap = {}\n\n[upper]\n{}\n\n[lower]\n{}\n", config.scenario.name(), gap.gap, gap.upper.report, gap.lower.report);
    report.push_str("\n[config]\n");
    report.push_str(&write_config(config));

    let mut out = Outputs::new(&config.out)?;
    out.write("value.csv", &value)?;
    out.write("policy.csv", &policy)?;
    out.write("report.txt", &report)?;
    let converged = gap.upper.report.converged && gap.lower.report.converged;
    strict_check(strict, &[&gap.upper, &gap.lower])?;
    Ok(RunSummary {
        lines: vec![
            format!("scenario {}: gap {:e}", config.scenario.name(), gap.gap),
            format!("upper: {} rounds, converged {}, residual {:e}", gap.upper.report.rounds, gap.upper.report.converged, gap.upper.report.max_residual),
            format!("lower: {} rounds, converged {}, residual {:e}", gap.lower.report.rounds, gap.lower.report.converged, gap.lower.report.max_residual),
            format!("wrote value.csv, policy.csv, report.txt to {}", config.out.display()),
        ],
        converged,
    })
}

/// Solves with player 2 updating first, simulates the resulting policies and
/// writes `mc_validation.csv` and `dpp.csv`.
pub fn run_validate(config: &RunConfig, strict: bool) -> Result<RunSummary, CliError> {
    let spec = config.scenario.params().build()?;
    let solver = GameSolver::new(&spec, config.settings())?;
    let sol = solver.policy_iteration(UpdateOrder::MinFirst)?;
    let sim = Simulator::new(&spec, &sol.u1, &sol.u2)?;
    let horizon = config.t_max.unwrap_or_else(|| default_horizon(&spec));
    let (a, b) = (spec.lower, spec.upper);
    let points = config
        .mc_x0
        .clone()
        .unwrap_or_else(|| (1..12).map(|i| a + i as f64 * (b - a) / 12.0).collect());

    let mut mc = String::from("x0,v_solver,j_mc,stderr,z_score\n");
    let mut worst: f64 = 0.0;
    for &x0 in &points {
        let est = sim.estimate_j(x0, config.mc_paths, config.seed, horizon)?;
        let v = sol.value.eval_extended(x0, &spec);
        let diff = est.mean - v;
        // Differences at solver tolerance are exact agreement, whatever the
        // round-off in the standard error.
        let z = if diff.abs() <= config.tol {
            0.0
        } else if est.std_error > 0.0 {
            diff / est.std_error
        } else {
            diff.signum() * f64::INFINITY
        };
        worst = worst.max(z.abs());
        let _ = writeln!(mc, "{x0},{v},{},{},{z}", est.mean, est.std_error);
    }

    let x0 = config.dpp_x0.unwrap_or(0.5 * (a + b));
    let mut dpp = String::from("x0,T,residual,stderr\n");
    for &t in &config.dpp_horizons {
        let r = sim.check_dpp(x0, t, config.mc_paths, config.seed, &sol.value)?;
        let _ = writeln!(dpp, "{x0},{t},{},{}", r.mean, r.std_error);
    }

    let mut out = Outputs::new(&config.out)?;
    out.write("mc_validation.csv", &mc)?;
    out.write("dpp.csv", &dpp)?;
    strict_check(strict, &[&sol])?;
    Ok(RunSummary {
        lines: vec![
            format!("scenario {}: {} paths per point, largest |z| {worst:.3}", config.scenario.name(), config.mc_paths),
            format!("wrote mc_validation.csv, dpp.csv to {}", config.out.display()),
        ],
        converged: sol.report.converged,
    })
}

/// Runs both update orders and writes `gap.txt`.
pub fn run_gap(config: &RunConfig, strict: bool) -> Result<RunSummary, CliError> {
    let spec = config.scenario.params().build()?;
    let solver = GameSolver::new(&spec, config.settings())?;
    let gap = solver.upper_lower_gap()?;
    let excess = gap
        .lower
        .value
        .values()
        .iter()
        .zip(gap.upper.value.values())
        .map(|(l, u)| l - u)
        .fold(f64::NEG_INFINITY, f64::max);
    let text = format!(
        "scenario = {}\ngap = {}\nmax_lower_minus_upper = {}\nupper_converged = {}\nlower_converged = {}\n",
        config.scenario.name(),
        gap.gap,
        excess,
        gap.upper.report.converged,
        gap.lower.report.converged
    );
    let mut out = Outputs::new(&config.out)?;
    out.write("gap.txt", &text)?;
    strict_check(strict, &[&gap.upper, &gap.lower])?;
    Ok(RunSummary {
        lines: vec![format!("gap = {}", gap.gap), format!("max(v_lower - v_upper) = {excess}")],
        converged: gap.upper.report.converged && gap.lower.report.converged,
    })
}

/// Dispatches a parsed command line.
pub fn run(cli: &Cli) -> Result<RunSummary, CliError> {
    type Runner = fn(&RunConfig, bool) -> Result<RunSummary, CliError>;
    let (args, f): (&RunArgs, Runner) = match &cli.command {
        Command::Solve(a) => (a, run_solve),
        Command::Validate(a) => (a, run_validate),
        Command::Gap(a) => (a, run_gap),
    };
    let config = load_config(args)?;
    f(&config, args.strict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn preset_configs_fill_market_fields() {
        let c = parse_config("scenario = xl-exp-pareto\ngrid_n = 201 # coarse\n").unwrap();
        let p = c.scenario.params();
        assert_eq!((p.lower, p.upper), (-2.0, 2.0));
        assert_eq!(p.claims, [ClaimModel::ParetoII { shape: 3.0, scale: 1.0 }; 2]);
        assert_eq!(c.grid_n, 201);
        assert_eq!(c.control_m, 101);
    }

    #[test]
    fn configuration_errors_are_descriptive() {
        let err = |text: &str| parse_config(text).unwrap_err().to_string();
        assert!(err("scenario = nope").contains("unknown scenario"));
        assert!(err("scenario = custom\nlower = -1").contains("`upper`"));
        assert!(err("grid_n = 2").contains("grid"));
        assert!(err("tol = -1").contains("tol"));
        assert!(err("mc_paths = 1").contains("mc_paths"));
        assert!(err("colour = blue").contains("unknown key"));
        assert!(err("seed = 1\nseed = 2").contains("twice"));
        assert!(err("lower = 0").contains("custom"));
        assert!(err("grid_n 5").contains("key = value"));
        assert_eq!(parse_config("scenario = nope").unwrap_err().exit_code(), 1);
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "scenario = xl-exp-exp\ngrid_n = 101\nseed = 5\n").unwrap();
        let args = RunArgs { config: Some(path), grid_n: Some(51), tol: Some(1e-9), ..RunArgs::default() };
        let c = load_config(&args).unwrap();
        assert_eq!(c.scenario, ScenarioChoice::Preset(Scenario::XlExpExp));
        assert_eq!((c.grid_n, c.seed, c.tol), (51, 5, 1e-9));
        let missing = RunArgs { config: Some(dir.path().join("absent.conf")), ..RunArgs::default() };
        assert_eq!(load_config(&missing).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn infinite_retention_is_written_as_token() {
        assert_eq!(control_token(f64::INFINITY), "inf");
        assert_eq!(control_token(0.25), "0.25");
    }

    fn claims() -> impl Strategy<Value = ClaimModel> {
        prop_oneof![
            (0.1f64..5.0).prop_map(|mean| ClaimModel::Exponential { mean }),
            (2.5f64..6.0, 0.1f64..4.0).prop_map(|(shape, scale)| ClaimModel::ParetoII { shape, scale }),
        ]
    }

    fn market() -> impl Strategy<Value = MarketParams> {
        (
            (-5.0f64..-0.1, 0.1f64..5.0, 0.01f64..0.5),
            ([0.1f64..3.0, 0.1f64..3.0], [claims(), claims()]),
            ([0.0f64..0.5, 0.0f64..0.5], [0.0f64..0.5, 0.0f64..0.5]),
            (any::<bool>(), proptest::option::of(0.5f64..5.0), 0u8..3, 0u8..3),
        )
            .prop_map(|((lower, upper, discount), (intensity, claims), (loading, reinsurance_loading), (xl, base, run, exit))| {
                let mut p = MarketParams {
                    lower,
                    upper,
                    discount,
                    intensity,
                    claims,
                    loading,
                    reinsurance_loading,
                    retention: if xl { RetentionKind::ExcessOfLoss } else { RetentionKind::Proportional },
                    base_rate: [base, None],
                    retention_cap: [None, None],
                    running: RunningPayoff::Constant(0.0),
                    exit: ExitPayoff::UpperIndicator,
                };
                if xl {
                    p.retention_cap = [Some(upper - lower + 1.0), None];
                }
                p.running = match run {
                    0 => RunningPayoff::Constant(0.0),
                    1 => RunningPayoff::Constant(discount * 0.3),
                    _ => RunningPayoff::Table(PiecewiseLinear::new(vec![lower, upper], vec![0.1, 0.2]).unwrap()),
                };
                p.exit = match exit {
                    0 => ExitPayoff::UpperIndicator,
                    1 => ExitPayoff::Constant(0.3),
                    _ => ExitPayoff::Table(PiecewiseLinear::new(vec![lower, 0.0, upper], vec![0.0, 0.25, 1.0]).unwrap()),
                };
                p
            })
    }

    fn config() -> impl Strategy<Value = RunConfig> {
        (
            prop_oneof![
                (0usize..3).prop_map(|i| ScenarioChoice::Preset(Scenario::ALL[i])),
                market().prop_map(|p| ScenarioChoice::Custom(Box::new(p))),
            ],
            (3usize..2000, 1usize..300, 1e-14f64..1e-2, 1e-9f64..1e-1),
            (1usize..50, 1usize..100_000, 2usize..1_000_000, any::<u64>()),
            (proptest::option::of(1.0f64..1e4), proptest::option::of(proptest::collection::vec(-3.0f64..3.0, 1..6))),
            (proptest::option::of(-1.0f64..1.0), proptest::collection::vec(0.01f64..10.0, 1..4), "[a-z][a-z0-9_/]{0,12}"),
        )
            .prop_map(|(scenario, (grid_n, control_m, tol, epsilon), (max_rounds, max_sweeps, mc_paths, seed), (t_max, mc_x0), (dpp_x0, dpp_horizons, out))| {
                RunConfig {
                    scenario,
                    grid_n,
                    control_m,
                    tol,
                    epsilon,
                    max_rounds,
                    max_sweeps,
                    mc_paths,
                    seed,
                    t_max,
                    mc_x0,
                    dpp_x0,
                    dpp_horizons,
                    out: PathBuf::from(out),
                }
            })
    }

    proptest! {
        #[test]
        fn config_round_trips(c in config()) {
            let text = write_config(&c);
            let back = parse_config(&text);
            prop_assert!(back.is_ok(), "{text}\n{:?}", back);
            prop_assert_eq!(back.unwrap(), c);
        }
    }
}
