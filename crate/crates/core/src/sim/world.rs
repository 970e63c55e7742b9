//! Scenario configuration and the tick loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::Vec2;
use super::lidar::{raycast_into, Disc, LidarConfig, LidarError};
use super::track::{TrackConfig, TrackError, TrackMap};
use super::vehicle::{step_vehicle, VehicleConfig, VehicleState};
use crate::check::{check_trace, TraceReport};
use crate::controllers::{BankConfig, BankError, ControllerBank, PlantInfo};
use crate::manager::{ManagerError, RiManager, SelectionPolicy};
use crate::policies;
use crate::trace::{IoEvent, Trace, Valuation, Value};
use crate::tracelog::TickRecord;
use crate::vdta::{expr::MinFront, BuiltinRegistry, Policy, PolicyError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PedestrianConfig {
    /// Most pedestrians present at once.
    pub cap: usize,
    /// Spawn probability per tick while below the cap.
    pub spawn_prob: f64,
    /// Mean of the geometric dwell time.
    pub mean_dwell_ticks: f64,
    pub radius: f64,
    /// Pedestrians never appear closer than this to a car.
    pub min_spawn_distance: f64,
    /// Walk across the corridor instead of standing still.
    pub lateral_drift: bool,
    pub drift_speed: f64,
}

impl Default for PedestrianConfig {
    fn default() -> Self {
        PedestrianConfig {
            cap: 0,
            spawn_prob: 0.002,
            mean_dwell_ticks: 40.0,
            radius: 0.25,
            min_spawn_distance: 3.0,
            lateral_drift: false,
            drift_speed: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub cars: usize,
    /// Seconds between consecutive car entries.
    pub car_spawn_interval: f64,
    /// Explicit entry ticks, overriding the interval.
    pub car_spawn_ticks: Option<Vec<u64>>,
    /// A car is held back while another car is this close to the start.
    pub start_clearance: f64,
    pub pedestrians: PedestrianConfig,
    pub seed: u64,
    pub dt: f64,
    pub max_ticks: u64,
    pub track: TrackConfig,
    pub lidar: LidarConfig,
    pub vehicle: VehicleConfig,
    pub bank: BankConfig,
    pub selection: SelectionPolicy,
    pub fallback_group: Option<usize>,
    /// Keep per-car histories and run the post-run audit.
    pub audit: bool,
    /// Keep every tick record in the result.
    pub record_trace: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            cars: 1,
            car_spawn_interval: 15.0,
            car_spawn_ticks: None,
            start_clearance: 2.0,
            pedestrians: PedestrianConfig::default(),
            seed: 0,
            dt: 0.05,
            max_ticks: 2400,
            track: TrackConfig::default(),
            lidar: LidarConfig::default(),
            vehicle: VehicleConfig::default(),
            bank: BankConfig::default(),
            selection: SelectionPolicy::PreferLast,
            fallback_group: None,
            audit: true,
            record_trace: false,
        }
    }
}

impl Scenario {
    pub fn spawn_ticks(&self) -> Vec<u64> {
        match &self.car_spawn_ticks {
            Some(t) => t.iter().copied().take(self.cars).collect(),
            None => (0..self.cars).map(|k| (k as f64 * self.car_spawn_interval / self.dt).round() as u64).collect(),
        }
    }

    pub fn plant(&self) -> PlantInfo {
        PlantInfo { rays: self.lidar.rays, fov_deg: self.lidar.fov_deg, max_range: self.lidar.max_range, dt: self.dt }
    }

    /// Guard builtins matching this scenario's scan geometry.
    pub fn builtins(&self) -> BuiltinRegistry {
        let mut reg = BuiltinRegistry::default();
        reg.register(std::sync::Arc::new(MinFront { fov_deg: self.lidar.fov_deg, ..MinFront::default() }));
        reg
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    /// Normal group only, no manager.
    Bare,
    Ri,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrashCause {
    Wall,
    Car,
    /// The car was moving when it hit a pedestrian.
    CarHitPedestrian,
    /// The car was (nearly) stopped; the pedestrian walked into it.
    PedestrianIntoCar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashInfo {
    pub tick: u64,
    pub cause: CrashCause,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarAudit {
    pub report: TraceReport,
    /// First `(tick, policy)` whose state entered a trap location.
    pub trap_entered: Option<(u64, usize)>,
    /// First `(tick, controller)` whose state changed while it was not run.
    pub frozen_violation: Option<(u64, String)>,
}

impl CarAudit {
    pub fn ok(&self) -> bool {
        self.report.all_pass() && self.trap_entered.is_none() && self.frozen_violation.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarResult {
    pub spawn_tick: Option<u64>,
    pub crash: Option<CrashInfo>,
    /// Ticks this car was driven (spawned and not crashed).
    pub active_ticks: u64,
    /// Ticks per selected group (ri mode only).
    pub mode_ticks: Vec<u64>,
    /// Ticks whose selected group differs from the previous tick's.
    pub changes: u64,
    pub audit: Option<CarAudit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub mode: ControlMode,
    pub seed: u64,
    pub ticks: u64,
    pub group_names: Vec<String>,
    pub cars: Vec<CarResult>,
    pub pedestrians_spawned: u64,
    #[serde(skip)]
    pub trace: Vec<TickRecord>,
}

impl ScenarioResult {
    pub fn spawned_cars(&self) -> usize {
        self.cars.iter().filter(|c| c.spawn_tick.is_some()).count()
    }

    pub fn crashed_cars(&self) -> usize {
        self.cars.iter().filter(|c| c.crash.is_some()).count()
    }

    pub fn any_crash(&self) -> bool {
        self.crashed_cars() > 0
    }

    pub fn audit_ok(&self) -> bool {
        self.cars.iter().all(|c| c.audit.as_ref().is_none_or(CarAudit::ok))
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Lidar(#[from] LidarError),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("{policies} policies for {groups} controller groups")]
    GroupMismatch { policies: usize, groups: usize },
    #[error("setting up the manager: {0}")]
    Setup(ManagerError),
    #[error("seed {seed}, tick {tick}, car {car}: {source}")]
    Manager { seed: u64, tick: u64, car: usize, source: ManagerError, dump: Vec<TickRecord> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pedestrian {
    pub pos: Vec2,
    pub spawn_tick: u64,
    pub dwell_ticks: u64,
    pub radius: f64,
    pub velocity: Vec2,
}

struct Car {
    state: VehicleState,
    spawned: bool,
    due_tick: u64,
    result: CarResult,
    control: Option<CarControl>,
}

struct CarControl {
    bank: ControllerBank,
    manager: Option<RiManager>,
    last_selected: Option<usize>,
    histories: Option<(Trace, Vec<Trace>)>,
}

/// Geometric sample with the given mean (at least 1).
fn geometric(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 1.0 {
        return 1;
    }
    let p = 1.0 / mean;
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    (u.ln() / (1.0 - p).ln()).ceil().max(1.0) as u64
}

/// Runs a scenario with the shipped policies.
pub fn run_scenario(scenario: &Scenario, mode: ControlMode) -> Result<ScenarioResult, SimError> {
    let policies = policies::shipped(&scenario.builtins())?;
    run_scenario_with(scenario, mode, &policies)
}

/// Runs a scenario; `policies[i]` governs controller group `i`.
pub fn run_scenario_with(scenario: &Scenario, mode: ControlMode, policies: &[Policy]) -> Result<ScenarioResult, SimError> {
    scenario.lidar.validate()?;
    let map = TrackMap::new(scenario.track, scenario.vehicle.radius)?;
    let plant = scenario.plant();
    let group_names: Vec<String> = scenario.bank.groups.iter().map(|g| g.name.clone()).collect();
    if mode == ControlMode::Ri && policies.len() != group_names.len() {
        return Err(SimError::GroupMismatch { policies: policies.len(), groups: group_names.len() });
    }
    let n_groups = group_names.len();

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let (start, start_heading) = map.start();
    let mut cars: Vec<Car> = scenario
        .spawn_ticks()
        .into_iter()
        .map(|due_tick| Car {
            state: VehicleState::at(start, start_heading, 0),
            spawned: false,
            due_tick,
            result: CarResult {
                spawn_tick: None,
                crash: None,
                active_ticks: 0,
                mode_ticks: vec![0; if mode == ControlMode::Ri { n_groups } else { 0 }],
                changes: 0,
                audit: None,
            },
            control: None,
        })
        .collect();
    let mut peds: Vec<Pedestrian> = Vec::new();
    let mut pedestrians_spawned = 0u64;
    let mut trace = Vec::new();
    let mut rays = Vec::with_capacity(scenario.lidar.rays);
    let mut discs = Vec::new();
    let mut commands = vec![(0.0, 0.0); cars.len()];
    let ped_cfg = &scenario.pedestrians;

    for tick in 0..scenario.max_ticks {
        // Car entries, held back while the start area is occupied.
        for i in 0..cars.len() {
            if cars[i].spawned || tick < cars[i].due_tick {
                continue;
            }
            let blocked = cars.iter().any(|c| c.spawned && c.state.pos.dist(start) < scenario.start_clearance);
            if blocked {
                continue;
            }
            let car = &mut cars[i];
            car.spawned = true;
            car.state = VehicleState::at(start, start_heading, tick);
            car.result.spawn_tick = Some(tick);
            let manager = match mode {
                ControlMode::Bare => None,
                ControlMode::Ri => Some(
                    RiManager::new(policies.to_vec(), scenario.selection)
                        .and_then(|m| m.with_fallback(scenario.fallback_group))
                        .map_err(SimError::Setup)?,
                ),
            };
            let histories = (mode == ControlMode::Ri && scenario.audit)
                .then(|| (Trace::new(), vec![Trace::new(); n_groups]));
            car.control = Some(CarControl {
                bank: ControllerBank::vehicle(&scenario.bank, &plant)?,
                manager,
                last_selected: None,
                histories,
            });
        }

        // Pedestrians leave after their dwell time, then maybe one appears.
        peds.retain(|p| tick < p.spawn_tick + p.dwell_ticks);
        if peds.len() < ped_cfg.cap && rng.gen_bool(ped_cfg.spawn_prob.clamp(0.0, 1.0)) {
            let dwell_ticks = geometric(&mut rng, ped_cfg.mean_dwell_ticks);
            let lateral_sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            for _ in 0..20 {
                let s = rng.gen_range(0.0..map.centerline_length());
                let pos = map.centerline_point(s);
                let clear = cars.iter().filter(|c| c.spawned).all(|c| c.state.pos.dist(pos) >= ped_cfg.min_spawn_distance);
                if clear {
                    let ahead = map.centerline_point(s + 0.01) - pos;
                    let velocity = if ped_cfg.lateral_drift {
                        Vec2::new(-ahead.y, ahead.x) * (lateral_sign * ped_cfg.drift_speed / ahead.norm().max(1e-12))
                    } else {
                        Vec2::default()
                    };
                    peds.push(Pedestrian { pos, spawn_tick: tick, dwell_ticks, radius: ped_cfg.radius, velocity });
                    pedestrians_spawned += 1;
                    break;
                }
            }
        }

        // Sense and decide for every car against the same world snapshot.
        for i in 0..cars.len() {
            commands[i] = (0.0, 0.0);
            if !cars[i].spawned || cars[i].state.crashed {
                continue;
            }
            discs.clear();
            discs.extend(
                cars.iter()
                    .enumerate()
                    .filter(|(j, c)| *j != i && c.spawned)
                    .map(|(_, c)| Disc { center: c.state.pos, radius: scenario.vehicle.radius }),
            );
            discs.extend(peds.iter().map(|p| Disc { center: p.pos, radius: p.radius }));
            let st = cars[i].state;
            raycast_into(&map, &discs, st.pos, st.heading, &scenario.lidar, &mut rays);
            let input = Valuation::new(vec![Value::Array(rays.as_slice().into()), Value::Scalar(st.speed)]);

            let car = &mut cars[i];
            car.result.active_ticks += 1;
            let control = car.control.as_mut().expect("spawned cars have controllers");
            let output = match control.manager.as_mut() {
                None => control.bank.execute_group(0, &input),
                Some(mgr) => {
                    let before = control.histories.is_some().then(|| control.bank.snapshots());
                    let outcome = match mgr.step(input, &mut control.bank) {
                        Ok(o) => o,
                        Err(source) => {
                            let dump = trace.iter().filter(|r: &&TickRecord| r.car == Some(i)).cloned().collect();
                            return Err(SimError::Manager { seed: scenario.seed, tick, car: i, source, dump });
                        }
                    };
                    car.result.mode_ticks[outcome.selected] += 1;
                    if control.last_selected.is_some_and(|s| s != outcome.selected) {
                        car.result.changes += 1;
                    }
                    control.last_selected = Some(outcome.selected);

                    if let (Some(before), Some((released, groups))) = (before, control.histories.as_mut()) {
                        let audit = car.result.audit.get_or_insert_with(|| CarAudit {
                            report: check_trace(&[], &Trace::new(), &[]),
                            trap_entered: None,
                            frozen_violation: None,
                        });
                        if audit.trap_entered.is_none() {
                            audit.trap_entered = (0..mgr.len())
                                .find(|&p| mgr.policy(p).traps.contains(mgr.state(p).location))
                                .map(|p| (tick, p));
                        }
                        if audit.frozen_violation.is_none() {
                            let after = control.bank.snapshots();
                            let active = control.bank.last_active();
                            for (k, ((name, b), (_, a))) in before.iter().zip(&after).enumerate() {
                                let same = b.len() == a.len() && b.iter().zip(a).all(|(x, y)| x.to_bits() == y.to_bits());
                                if !active[k] && !same {
                                    audit.frozen_violation = Some((tick, name.clone()));
                                    break;
                                }
                            }
                        }
                        released.push(outcome.event.clone());
                        for (h, y) in groups.iter_mut().zip(&outcome.group_outputs) {
                            h.push(IoEvent { input: outcome.event.input.clone(), output: y.clone() });
                        }
                    }
                    if scenario.record_trace {
                        trace.push(TickRecord::from_outcome(&outcome, Some(i)));
                    }
                    outcome.event.output.expect("released outputs are never ⊥")
                }
            };
            let scalar = |k: usize| output.get(k).and_then(Value::as_scalar).unwrap_or(0.0);
            commands[i] = (scalar(0), scalar(1));
        }

        // Move.
        for (car, &(d, a)) in cars.iter_mut().zip(&commands) {
            if car.spawned && !car.state.crashed {
                car.state = step_vehicle(&car.state, d, a, scenario.dt, &scenario.vehicle);
            }
        }
        if ped_cfg.lateral_drift {
            for p in &mut peds {
                let next = p.pos + p.velocity * scenario.dt;
                if map.wall_distance(next) <= p.radius {
                    p.velocity = p.velocity * -1.0;
                } else {
                    p.pos = next;
                }
            }
        }

        // Collisions.
        let r = scenario.vehicle.radius;
        let mut newly: Vec<(usize, CrashCause)> = Vec::new();
        for (i, c) in cars.iter().enumerate() {
            if !c.spawned || c.state.crashed {
                continue;
            }
            let p = c.state.pos;
            let cause = if map.wall_distance(p) < r || !map.in_corridor(p) {
                Some(CrashCause::Wall)
            } else if cars.iter().enumerate().any(|(j, o)| j != i && o.spawned && o.state.pos.dist(p) < 2.0 * r) {
                Some(CrashCause::Car)
            } else if peds.iter().any(|q| q.pos.dist(p) < r + q.radius) {
                Some(if c.state.speed <= 0.05 { CrashCause::PedestrianIntoCar } else { CrashCause::CarHitPedestrian })
            } else {
                None
            };
            if let Some(cause) = cause {
                newly.push((i, cause));
            }
        }
        for (i, cause) in newly {
            let car = &mut cars[i];
            car.state.crashed = true;
            car.state.speed = 0.0;
            car.result.crash = Some(CrashInfo { tick, cause });
        }
    }

    let mut results = Vec::with_capacity(cars.len());
    for car in cars {
        let mut result = car.result;
        if let Some(CarControl { manager: Some(mgr), histories: Some((released, groups)), .. }) = car.control {
            let report = check_trace(policies, &released, &groups);
            debug_assert_eq!(mgr.released().len(), released.len());
            let audit = result.audit.get_or_insert_with(|| CarAudit {
                report: report.clone(),
                trap_entered: None,
                frozen_violation: None,
            });
            audit.report = report;
        }
        results.push(result);
    }

    Ok(ScenarioResult {
        mode,
        seed: scenario.seed,
        ticks: scenario.max_ticks,
        group_names,
        cars: results,
        pedestrians_spawned,
        trace,
    })
}
