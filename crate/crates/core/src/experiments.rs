//! Batch experiments: crash-rate and mode tables, manager overhead and
//! policy-count scaling.

use std::collections::BTreeMap;
use std::fmt;
use std::hint::black_box;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{BankConfig, ControllerBank, GroupConfig, SteeringKind};
use crate::manager::{GroupBank, RiManager};
use crate::policies;
use crate::sim::{run_scenario_with, ControlMode, CrashCause, Scenario, ScenarioResult, SimError};
use crate::trace::Valuation;
use crate::tracelog::from_json;
use crate::vdta::{Policy, PolicyError};

/// Environment variable overriding a plan's base seed.
pub const SEED_ENV: &str = "RI_SEED";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("cell {cars} cars / {pedestrians} peds, {mode:?}, trial {trial}, seed {seed}: {source}")]
    Scenario { cars: usize, pedestrians: usize, mode: ControlMode, trial: u64, seed: u64, source: Box<SimError> },
    #[error("out of memory building {copies} policy copies")]
    Memory { copies: usize },
    #[error("{SEED_ENV} is not an unsigned integer: {0:?}")]
    SeedEnv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    pub cars: Vec<usize>,
    pub pedestrians: Vec<usize>,
    pub modes: Vec<ControlMode>,
    pub trials: u64,
    pub base_seed: u64,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    /// Template for every trial; car count, pedestrian cap and seed are
    /// filled in per trial.
    pub scenario: Scenario,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            cars: vec![1, 2, 3],
            pedestrians: vec![0, 1, 2],
            modes: vec![ControlMode::Bare, ControlMode::Ri],
            trials: 200,
            base_seed: 0x5eed,
            threads: None,
            scenario: Scenario::default(),
        }
    }
}

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one trial. Both modes of a cell share it, so bare and ri runs
/// see the same pedestrian draws.
pub fn trial_seed(base: u64, cell: usize, trial: u64) -> u64 {
    mix64(mix64(base ^ mix64(cell as u64)) ^ trial)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub index: usize,
    pub cars: usize,
    pub pedestrians: usize,
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let plan: ExperimentPlan = toml::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Full-scale setting: 1000 trials per cell.
    pub fn full_scale(self) -> Self {
        ExperimentPlan { trials: 1000, ..self }
    }

    /// Applies `RI_SEED` if set.
    pub fn with_env_seed(mut self) -> Result<Self, ExperimentError> {
        if let Ok(s) = std::env::var(SEED_ENV) {
            self.base_seed = s.trim().parse().map_err(|_| ExperimentError::SeedEnv(s))?;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::InvalidPlan("trials must be at least 1".into()));
        }
        if self.cars.is_empty() || self.pedestrians.is_empty() || self.modes.is_empty() {
            return Err(ExperimentError::InvalidPlan("cars, pedestrians and modes must be non-empty".into()));
        }
        if self.cars.contains(&0) {
            return Err(ExperimentError::InvalidPlan("car counts must be positive".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &cars in &self.cars {
            for &pedestrians in &self.pedestrians {
                out.push(Cell { index: out.len(), cars, pedestrians });
            }
        }
        out
    }

    pub fn scenario_for(&self, cell: &Cell, trial: u64) -> Scenario {
        let mut s = self.scenario.clone();
        s.cars = cell.cars;
        s.pedestrians.cap = cell.pedestrians;
        s.seed = trial_seed(self.base_seed, cell.index, trial);
        s
    }

    fn pool(&self) -> Result<rayon::ThreadPool, ExperimentError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads.unwrap_or(0))
            .build()
            .map_err(|e| ExperimentError::InvalidPlan(e.to_string()))
    }
}

/// Per-cell counters. Merging is addition, so trial order does not matter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellStats {
    pub cars: usize,
    pub pedestrians: usize,
    pub mode: ControlMode,
    pub trials: u64,
    pub spawned_cars: u64,
    pub crashed_cars: u64,
    pub trials_with_crash: u64,
    pub active_ticks: u64,
    /// Ticks per group, in group order (ri only).
    pub mode_ticks: Vec<u64>,
    pub changes: u64,
    pub causes: BTreeMap<String, u64>,
    /// Trials whose post-run audit failed.
    pub audit_failures: u64,
    pub trap_entries: u64,
    pub frozen_violations: u64,
}

/// Wilson score interval for `k` successes in `n` trials at `z`.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn pct(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

impl CellStats {
    pub fn new(cars: usize, pedestrians: usize, mode: ControlMode, groups: usize) -> Self {
        CellStats {
            cars,
            pedestrians,
            mode,
            trials: 0,
            spawned_cars: 0,
            crashed_cars: 0,
            trials_with_crash: 0,
            active_ticks: 0,
            mode_ticks: vec![0; groups],
            changes: 0,
            causes: BTreeMap::new(),
            audit_failures: 0,
            trap_entries: 0,
            frozen_violations: 0,
        }
    }

    pub fn add(&mut self, r: &ScenarioResult) {
        self.trials += 1;
        self.spawned_cars += r.spawned_cars() as u64;
        self.crashed_cars += r.crashed_cars() as u64;
        self.trials_with_crash += r.any_crash() as u64;
        self.audit_failures += (!r.audit_ok()) as u64;
        for c in &r.cars {
            self.active_ticks += c.active_ticks;
            self.changes += c.changes;
            for (m, t) in self.mode_ticks.iter_mut().zip(&c.mode_ticks) {
                *m += t;
            }
            if let Some(crash) = c.crash {
                *self.causes.entry(cause_name(crash.cause).into()).or_default() += 1;
            }
            if let Some(a) = &c.audit {
                self.trap_entries += a.trap_entered.is_some() as u64;
                self.frozen_violations += a.frozen_violation.is_some() as u64;
            }
        }
    }

    pub fn merge(&mut self, other: &CellStats) {
        self.trials += other.trials;
        self.spawned_cars += other.spawned_cars;
        self.crashed_cars += other.crashed_cars;
        self.trials_with_crash += other.trials_with_crash;
        self.active_ticks += other.active_ticks;
        self.changes += other.changes;
        self.audit_failures += other.audit_failures;
        self.trap_entries += other.trap_entries;
        self.frozen_violations += other.frozen_violations;
        for (m, t) in self.mode_ticks.iter_mut().zip(&other.mode_ticks) {
            *m += t;
        }
        for (k, v) in &other.causes {
            *self.causes.entry(k.clone()).or_default() += v;
        }
    }

    /// Crashed cars over spawned cars, in percent.
    pub fn crash_rate(&self) -> f64 {
        pct(self.crashed_cars, self.spawned_cars)
    }

    /// Trials with at least one crash, in percent.
    pub fn any_crash_rate(&self) -> f64 {
        pct(self.trials_with_crash, self.trials)
    }

    /// 95% Wilson interval of the per-car crash rate, in percent.
    pub fn crash_ci(&self) -> (f64, f64) {
        let (lo, hi) = wilson(self.crashed_cars, self.spawned_cars, 1.96);
        (100.0 * lo, 100.0 * hi)
    }

    /// Share of ticks in group `g`, in percent. Bare runs count as the first
    /// group throughout.
    pub fn mode_pct(&self, g: usize) -> f64 {
        match self.mode {
            ControlMode::Bare => {
                if g == 0 {
                    100.0
                } else {
                    0.0
                }
            }
            ControlMode::Ri => pct(self.mode_ticks.get(g).copied().unwrap_or(0), self.mode_ticks.iter().sum()),
        }
    }

    pub fn change_rate(&self) -> f64 {
        pct(self.changes, self.active_ticks)
    }
}

fn cause_name(c: CrashCause) -> &'static str {
    match c {
        CrashCause::Wall => "wall",
        CrashCause::Car => "car",
        CrashCause::CarHitPedestrian => "car_hit_pedestrian",
        CrashCause::PedestrianIntoCar => "pedestrian_into_car",
    }
}

fn mode_name(m: ControlMode) -> &'static str {
    match m {
        ControlMode::Bare => "bare",
        ControlMode::Ri => "ri",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tables {
    pub group_names: Vec<String>,
    pub cells: Vec<CellStats>,
}

impl Tables {
    pub fn cell(&self, cars: usize, pedestrians: usize, mode: ControlMode) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.cars == cars && c.pedestrians == pedestrians && c.mode == mode)
    }

    fn group(&self, name: &str) -> usize {
        self.group_names.iter().position(|g| g == name).unwrap_or(usize::MAX)
    }

    /// `scenario,cars,peds,crash_rate,normal_pct,stopping_pct,cautious_pct,change_rate`
    /// followed by `trials,any_crash_rate,crash_ci_low,crash_ci_high,audit_failures`.
    pub fn write_summary(&self, w: impl Write) -> Result<(), ExperimentError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "scenario",
            "cars",
            "peds",
            "crash_rate",
            "normal_pct",
            "stopping_pct",
            "cautious_pct",
            "change_rate",
            "trials",
            "any_crash_rate",
            "crash_ci_low",
            "crash_ci_high",
            "audit_failures",
        ])?;
        let (n, s, c) = (self.group("normal"), self.group("stopping"), self.group("cautious"));
        for cell in &self.cells {
            let (lo, hi) = cell.crash_ci();
            out.write_record([
                mode_name(cell.mode).to_string(),
                cell.cars.to_string(),
                cell.pedestrians.to_string(),
                fmt_pct(cell.crash_rate()),
                fmt_pct(cell.mode_pct(n)),
                fmt_pct(cell.mode_pct(s)),
                fmt_pct(cell.mode_pct(c)),
                fmt_pct(cell.change_rate()),
                cell.trials.to_string(),
                fmt_pct(cell.any_crash_rate()),
                fmt_pct(lo),
                fmt_pct(hi),
                cell.audit_failures.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Bare-mode crash rates: `cars,peds,crash_rate,crash_ci_low,crash_ci_high,any_crash_rate,trials`.
    pub fn write_table1(&self, w: impl Write) -> Result<(), ExperimentError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["cars", "peds", "crash_rate", "crash_ci_low", "crash_ci_high", "any_crash_rate", "trials"])?;
        for cell in self.cells.iter().filter(|c| c.mode == ControlMode::Bare) {
            let (lo, hi) = cell.crash_ci();
            out.write_record([
                cell.cars.to_string(),
                cell.pedestrians.to_string(),
                fmt_pct(cell.crash_rate()),
                fmt_pct(lo),
                fmt_pct(hi),
                fmt_pct(cell.any_crash_rate()),
                cell.trials.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Ri-mode occupancy and safety:
    /// `cars,peds,normal_pct,stopping_pct,cautious_pct,change_rate,crash_rate,crash_ci_low,crash_ci_high,any_crash_rate,trials,audit_failures`.
    pub fn write_table2(&self, w: impl Write) -> Result<(), ExperimentError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "cars",
            "peds",
            "normal_pct",
            "stopping_pct",
            "cautious_pct",
            "change_rate",
            "crash_rate",
            "crash_ci_low",
            "crash_ci_high",
            "any_crash_rate",
            "trials",
            "audit_failures",
        ])?;
        let (n, s, c) = (self.group("normal"), self.group("stopping"), self.group("cautious"));
        for cell in self.cells.iter().filter(|c| c.mode == ControlMode::Ri) {
            let (lo, hi) = cell.crash_ci();
            out.write_record([
                cell.cars.to_string(),
                cell.pedestrians.to_string(),
                fmt_pct(cell.mode_pct(n)),
                fmt_pct(cell.mode_pct(s)),
                fmt_pct(cell.mode_pct(c)),
                fmt_pct(cell.change_rate()),
                fmt_pct(cell.crash_rate()),
                fmt_pct(lo),
                fmt_pct(hi),
                fmt_pct(cell.any_crash_rate()),
                cell.trials.to_string(),
                cell.audit_failures.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `summary.csv`, `table1.csv` and `table2.csv` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        self.write_summary(std::fs::File::create(dir.join("summary.csv"))?)?;
        self.write_table1(std::fs::File::create(dir.join("table1.csv"))?)?;
        self.write_table2(std::fs::File::create(dir.join("table2.csv"))?)?;
        Ok(())
    }
}

impl fmt::Display for Tables {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, s, c) = (self.group("normal"), self.group("stopping"), self.group("cautious"));
        writeln!(f, "mode cars peds  crash%  any%   normal% stop% caut%  change%")?;
        for cell in &self.cells {
            writeln!(
                f,
                "{:<4} {:>4} {:>4} {:>7.2} {:>6.1} {:>8.1} {:>5.1} {:>5.1} {:>7.2}",
                mode_name(cell.mode),
                cell.cars,
                cell.pedestrians,
                cell.crash_rate(),
                cell.any_crash_rate(),
                cell.mode_pct(n),
                cell.mode_pct(s),
                cell.mode_pct(c),
                cell.change_rate()
            )?;
        }
        Ok(())
    }
}

fn fmt_pct(x: f64) -> String {
    format!("{x:.4}")
}

/// Runs every cell of the plan, trials in parallel.
pub fn run_tables(plan: &ExperimentPlan) -> Result<Tables, ExperimentError> {
    plan.validate()?;
    let policies = policies::shipped(&plan.scenario.builtins())?;
    let group_names: Vec<String> = plan.scenario.bank.groups.iter().map(|g| g.name.clone()).collect();
    let cells = plan.cells();
    let jobs: Vec<(Cell, ControlMode, u64)> = cells
        .iter()
        .flat_map(|c| plan.modes.iter().flat_map(move |&m| (0..plan.trials).map(move |t| (*c, m, t))))
        .collect();

    let run = |&(cell, mode, trial): &(Cell, ControlMode, u64)| {
        let sc = plan.scenario_for(&cell, trial);
        let r = run_scenario_with(&sc, mode, &policies).map_err(|e| ExperimentError::Scenario {
            cars: cell.cars,
            pedestrians: cell.pedestrians,
            mode,
            trial,
            seed: sc.seed,
            source: Box::new(e),
        })?;
        let mut stats = CellStats::new(cell.cars, cell.pedestrians, mode, group_names.len());
        stats.add(&r);
        Ok::<_, ExperimentError>(stats)
    };
    let results: Vec<CellStats> = plan.pool()?.install(|| jobs.par_iter().map(run).collect::<Result<_, _>>())?;

    let mut out: Vec<CellStats> = Vec::new();
    for cell in &cells {
        for &mode in &plan.modes {
            out.push(CellStats::new(cell.cars, cell.pedestrians, mode, group_names.len()));
        }
    }
    for r in &results {
        let slot = out
            .iter_mut()
            .find(|c| c.cars == r.cars && c.pedestrians == r.pedestrians && c.mode == r.mode)
            .expect("every job belongs to a cell");
        slot.merge(r);
    }
    Ok(Tables { group_names, cells: out })
}

/// Time spent per phase across a replay.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub ticks: u64,
    /// Input phase: suspension mask.
    pub kappa: Duration,
    /// Output phase: validation, selection and commit.
    pub gamma: Duration,
    pub controllers: Duration,
}

impl PhaseTimes {
    pub fn add(&mut self, o: &PhaseTimes) {
        self.ticks += o.ticks;
        self.kappa += o.kappa;
        self.gamma += o.gamma;
        self.controllers += o.controllers;
    }
}

/// Controller time per tick below which the ratio is not meaningful.
pub const STUB_FLOOR: Duration = Duration::from_nanos(100);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverheadReport {
    pub label: String,
    pub times: PhaseTimes,
    /// Manager time over controller time; `None` for stub banks.
    pub ratio: Option<f64>,
    pub stub: bool,
}

impl OverheadReport {
    pub fn new(label: impl Into<String>, times: PhaseTimes) -> Self {
        let manager = (times.kappa + times.gamma).as_secs_f64();
        let controllers = times.controllers.as_secs_f64();
        let floor = STUB_FLOOR.as_secs_f64() * times.ticks as f64;
        let stub = times.ticks == 0 || controllers <= floor;
        OverheadReport { label: label.into(), times, ratio: (!stub).then(|| manager / controllers), stub }
    }

    pub fn manager_per_tick(&self) -> Duration {
        (self.times.kappa + self.times.gamma) / self.times.ticks.max(1) as u32
    }

    pub fn controllers_per_tick(&self) -> Duration {
        self.times.controllers / self.times.ticks.max(1) as u32
    }
}

impl fmt::Display for OverheadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.times;
        let per = |d: Duration| d.as_nanos() as f64 / t.ticks.max(1) as f64;
        write!(
            f,
            "{}: {} ticks, kappa {:.0} ns, gamma {:.0} ns, controllers {:.0} ns per tick, ",
            self.label,
            t.ticks,
            per(t.kappa),
            per(t.gamma),
            per(t.controllers)
        )?;
        match self.ratio {
            Some(r) => write!(f, "overhead {:.2}%", 100.0 * r),
            None => write!(f, "overhead undefined (stub controllers)"),
        }
    }
}

/// Feeds `inputs` through a fresh manager over `policies` and `bank`,
/// timing each phase separately.
pub fn replay_timed(
    policies: &[Policy],
    bank: &mut impl GroupBank,
    inputs: &[Valuation],
) -> Result<PhaseTimes, crate::manager::ManagerError> {
    let mut mgr = RiManager::new(policies.to_vec(), Default::default())?;
    let mut t = PhaseTimes::default();
    for input in inputs {
        let t0 = Instant::now();
        let mask = mgr.begin_tick(input.clone())?;
        let t1 = Instant::now();
        let outputs = bank.execute(input, &mask);
        let t2 = Instant::now();
        black_box(mgr.end_tick(outputs)?);
        let t3 = Instant::now();
        t.kappa += t1 - t0;
        t.controllers += t2 - t1;
        t.gamma += t3 - t2;
        t.ticks += 1;
    }
    Ok(t)
}

/// Records ri-mode input sequences over the plan's cells, then replays each
/// car's inputs on a single thread through a bank built with `steering`.
pub fn measure_overhead(plan: &ExperimentPlan, steering: SteeringKind) -> Result<OverheadReport, ExperimentError> {
    plan.validate()?;
    let policies = policies::shipped(&plan.scenario.builtins())?;
    let mut bank_cfg = plan.scenario.bank.clone();
    bank_cfg.steering = steering;
    let mut total = PhaseTimes::default();
    for cell in plan.cells() {
        for trial in 0..plan.trials {
            let mut sc = plan.scenario_for(&cell, trial);
            sc.record_trace = true;
            sc.audit = false;
            let r = run_scenario_with(&sc, ControlMode::Ri, &policies).map_err(|e| ExperimentError::Scenario {
                cars: cell.cars,
                pedestrians: cell.pedestrians,
                mode: ControlMode::Ri,
                trial,
                seed: sc.seed,
                source: Box::new(e),
            })?;
            for car in 0..r.cars.len() {
                let inputs: Vec<Valuation> =
                    r.trace.iter().filter(|t| t.car == Some(car)).map(|t| from_json(&t.input)).collect();
                if inputs.is_empty() {
                    continue;
                }
                let mut bank = ControllerBank::vehicle(&bank_cfg, &sc.plant())
                    .map_err(|e| ExperimentError::Scenario {
                        cars: cell.cars,
                        pedestrians: cell.pedestrians,
                        mode: ControlMode::Ri,
                        trial,
                        seed: sc.seed,
                        source: Box::new(e.into()),
                    })?;
                let t = replay_timed(&policies, &mut bank, &inputs).map_err(|e| ExperimentError::Scenario {
                    cars: cell.cars,
                    pedestrians: cell.pedestrians,
                    mode: ControlMode::Ri,
                    trial,
                    seed: sc.seed,
                    source: Box::new(SimError::Setup(e)),
                })?;
                total.add(&t);
            }
        }
    }
    let label = match steering {
        SteeringKind::Geometric => "geometric bank",
        SteeringKind::Mlp => "mlp bank",
    };
    Ok(OverheadReport::new(label, total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingConfig {
    /// Copies of the three shipped policies per point, ascending.
    pub counts: Vec<usize>,
    /// Timed runs per point; the median is reported.
    pub repeats: usize,
    pub scenario: Scenario,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        let mut scenario = Scenario { cars: 1, max_ticks: 200, audit: false, seed: 0x5ca1e, ..Scenario::default() };
        scenario.pedestrians.cap = 1;
        ScalingConfig { counts: vec![1000, 2000, 3000, 4000], repeats: 3, scenario }
    }
}

impl ScalingConfig {
    /// Full-scale counts: 1, 2, 3 and 4 × 10⁵ copies.
    pub fn full_scale(self) -> Self {
        ScalingConfig { counts: vec![100_000, 200_000, 300_000, 400_000], repeats: 1, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub copies: usize,
    pub policies: usize,
    pub ticks: u64,
    pub ns_per_tick: f64,
    /// Relative to the first point.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    /// Least-squares fit of ns per tick against copies.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl fmt::Display for ScalingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "copies  policies  us/tick   ratio")?;
        for p in &self.points {
            writeln!(f, "{:>6} {:>9} {:>8.1} {:>7.2}", p.copies, p.policies, p.ns_per_tick / 1e3, p.ratio)?;
        }
        write!(f, "fit: {:.2} ns/copy + {:.0} ns, R² = {:.4}", self.slope, self.intercept, self.r_squared)
    }
}

/// Ordinary least squares `y = slope·x + intercept` with R².
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

/// Group wiring and policies for `copies` copies of the shipped setup.
pub fn duplicated(
    base: &[Policy],
    groups: &[GroupConfig],
    copies: usize,
) -> Result<(Vec<Policy>, Vec<GroupConfig>), ExperimentError> {
    let n = base.len() * copies;
    let mut policies = Vec::new();
    let mut wiring = Vec::new();
    policies.try_reserve_exact(n).map_err(|_| ExperimentError::Memory { copies })?;
    wiring.try_reserve_exact(n).map_err(|_| ExperimentError::Memory { copies })?;
    for k in 0..copies {
        policies.extend(base.iter().cloned());
        wiring.extend(groups.iter().map(|g| GroupConfig {
            name: if k == 0 { g.name.clone() } else { format!("{}#{k}", g.name) },
            outputs: g.outputs.clone(),
        }));
    }
    Ok((policies, wiring))
}

/// Reruns the scenario with the shipped policies duplicated per count and
/// reports wall time per tick.
pub fn run_scaling(config: &ScalingConfig) -> Result<ScalingReport, ExperimentError> {
    if config.counts.is_empty() || config.counts.contains(&0) {
        return Err(ExperimentError::InvalidPlan("scaling counts must be positive".into()));
    }
    if config.counts.windows(2).any(|w| w[0] > w[1]) {
        return Err(ExperimentError::InvalidPlan("scaling counts must be ascending".into()));
    }
    let base = policies::shipped(&config.scenario.builtins())?;
    let mut points: Vec<ScalingPoint> = Vec::new();
    for &copies in &config.counts {
        let (policies, groups) = duplicated(&base, &config.scenario.bank.groups, copies)?;
        let mut sc = config.scenario.clone();
        sc.bank = BankConfig { groups, ..sc.bank };
        let mut samples = Vec::with_capacity(config.repeats.max(1));
        let mut ticks = 0;
        for _ in 0..config.repeats.max(1) {
            let t0 = Instant::now();
            let r = run_scenario_with(&sc, ControlMode::Ri, &policies).map_err(|e| ExperimentError::Scenario {
                cars: sc.cars,
                pedestrians: sc.pedestrians.cap,
                mode: ControlMode::Ri,
                trial: 0,
                seed: sc.seed,
                source: Box::new(e),
            })?;
            let elapsed = t0.elapsed();
            ticks = r.cars.iter().map(|c| c.active_ticks).sum::<u64>().max(1);
            samples.push(elapsed.as_nanos() as f64 / ticks as f64);
        }
        samples.sort_by(f64::total_cmp);
        let ns_per_tick = samples[samples.len() / 2];
        let ratio = points.first().map_or(1.0, |p| ns_per_tick / p.ns_per_tick);
        points.push(ScalingPoint { copies, policies: policies.len(), ticks, ns_per_tick, ratio });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.copies as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.ns_per_tick).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(ScalingReport { points, slope, intercept, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_distinct_and_stable() {
        let mut seen = std::collections::HashSet::new();
        for cell in 0..9 {
            for trial in 0..200 {
                assert!(seen.insert(trial_seed(7, cell, trial)));
            }
        }
        assert_eq!(trial_seed(7, 3, 5), trial_seed(7, 3, 5));
        assert_ne!(trial_seed(7, 3, 5), trial_seed(8, 3, 5));
    }

    #[test]
    fn wilson_matches_reference_values() {
        // 0 of 10: upper bound z²/(n+z²).
        let (lo, hi) = wilson(0, 10, 1.96);
        assert_eq!(lo, 0.0);
        assert!((hi - 1.96f64.powi(2) / (10.0 + 1.96f64.powi(2))).abs() < 1e-12);
        // Symmetric around one half.
        let (lo, hi) = wilson(50, 100, 1.96);
        assert!((lo + hi - 1.0).abs() < 1e-12);
        // Textbook interval for 50/100 at 95%: [0.4038, 0.5962].
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
    }

    #[test]
    fn fit_of_exact_line() {
        let (m, c, r2) = linear_fit(&[1.0, 2.0, 3.0, 4.0], &[3.0, 5.0, 7.0, 9.0]);
        assert!((m - 2.0).abs() < 1e-12 && (c - 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plan_validation_and_cells() {
        let plan = ExperimentPlan::default();
        assert_eq!(plan.cells().len(), 9);
        assert!(ExperimentPlan { trials: 0, ..ExperimentPlan::default() }.validate().is_err());
        let parsed = ExperimentPlan::from_toml("trials = 3\ncars = [2]\nmodes = [\"ri\"]\n").unwrap();
        assert_eq!((parsed.trials, parsed.cars.clone(), parsed.modes.clone()), (3, vec![2], vec![ControlMode::Ri]));
    }

    #[test]
    fn stub_bank_is_flagged() {
        let r = OverheadReport::new(
            "stub",
            PhaseTimes { ticks: 10, kappa: Duration::from_micros(5), gamma: Duration::from_micros(5), controllers: Duration::ZERO },
        );
        assert!(r.stub && r.ratio.is_none());
        let r = OverheadReport::new(
            "real",
            PhaseTimes { ticks: 10, kappa: Duration::from_micros(1), gamma: Duration::from_micros(1), controllers: Duration::from_micros(100) },
        );
        assert!((r.ratio.unwrap() - 0.02).abs() < 1e-12);
    }
}
