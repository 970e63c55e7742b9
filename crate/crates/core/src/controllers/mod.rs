//! Black-box controllers and their composition into groups.
//!
//! A [`ControllerBank`] owns every controller once. Groups reference
//! controllers through a wiring table mapping each system output channel to
//! one member output. A controller steps on a tick iff at least one group
//! using it is active, so a controller used only by suspended groups keeps
//! its state untouched.

pub mod mlp;
pub mod pid;
pub mod steering;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manager::GroupBank;
use crate::measures;
use crate::trace::{Valuation, Value};
pub use mlp::{MlpError, MlpModel};
pub use pid::{distance_pid, PidGains, PidState};
pub use steering::{GeometricSteering, SwerveHeuristic};

/// Sensor readings handed to every controller.
#[derive(Debug, Clone, Copy)]
pub struct Sensors<'a> {
    pub rays: &'a [f64],
    pub speed: f64,
}

pub trait Controller: Send {
    fn name(&self) -> &str;
    fn output_names(&self) -> &[&'static str];
    fn reset(&mut self);
    /// Writes one value per output name into `out`.
    fn step(&mut self, sensors: &Sensors<'_>, out: &mut [f64]);
    /// Internal state, for auditing that suspension freezes it.
    fn snapshot(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Braking command: decelerate at `v / dt_stop_target`, at most `r_max`,
/// never enough to reverse within one tick.
pub fn brake_linear(v: f64, r_max: f64, dt_stop_target: f64, dt: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let a = -r_max.min(v / dt_stop_target);
    a.max(-v / dt)
}

pub struct Steering {
    pub kind: SteeringImpl,
}

pub enum SteeringImpl {
    Geometric(GeometricSteering),
    /// Network over readings divided by `max_range`; first output is `d`.
    Mlp { model: MlpModel, max_range: f64, scratch: Vec<f64> },
}

impl Controller for Steering {
    fn name(&self) -> &str {
        "steer"
    }

    fn output_names(&self) -> &[&'static str] {
        &["d"]
    }

    fn reset(&mut self) {}

    fn step(&mut self, s: &Sensors<'_>, out: &mut [f64]) {
        out[0] = match &mut self.kind {
            SteeringImpl::Geometric(g) => g.steer(s.rays),
            SteeringImpl::Mlp { model, max_range, scratch } => {
                scratch.clear();
                scratch.extend(s.rays.iter().map(|r| r / *max_range));
                // A dimension mismatch is a wiring bug caught at bank
                // construction; fall back to straight ahead regardless.
                model.infer(scratch).map_or(0.0, |y| y[0]).clamp(-1.0, 1.0)
            }
        };
    }
}

pub struct FullThrottle {
    pub a_max: f64,
}

impl Controller for FullThrottle {
    fn name(&self) -> &str {
        "throttle"
    }

    fn output_names(&self) -> &[&'static str] {
        &["a"]
    }

    fn reset(&mut self) {}

    fn step(&mut self, _: &Sensors<'_>, out: &mut [f64]) {
        out[0] = self.a_max;
    }
}

pub struct Swerve(pub SwerveHeuristic);

impl Controller for Swerve {
    fn name(&self) -> &str {
        "swerve"
    }

    fn output_names(&self) -> &[&'static str] {
        &["d"]
    }

    fn reset(&mut self) {}

    fn step(&mut self, s: &Sensors<'_>, out: &mut [f64]) {
        out[0] = self.0.steer(s.rays);
    }
}

pub struct LinearBrake {
    pub r_max: f64,
    pub dt_stop_target: f64,
    pub dt: f64,
}

impl Controller for LinearBrake {
    fn name(&self) -> &str {
        "brake"
    }

    fn output_names(&self) -> &[&'static str] {
        &["a"]
    }

    fn reset(&mut self) {}

    fn step(&mut self, s: &Sensors<'_>, out: &mut [f64]) {
        out[0] = brake_linear(s.speed, self.r_max, self.dt_stop_target, self.dt);
    }
}

/// Car-following PID on the front-sector gap.
pub struct DistancePid {
    pub gains: PidGains,
    pub state: PidState,
    pub dt: f64,
    pub fov_deg: f64,
    pub sector_deg: f64,
}

impl Controller for DistancePid {
    fn name(&self) -> &str {
        "pid"
    }

    fn output_names(&self) -> &[&'static str] {
        &["a"]
    }

    fn reset(&mut self) {
        self.state = PidState::default();
    }

    fn step(&mut self, s: &Sensors<'_>, out: &mut [f64]) {
        let gap = measures::min_front(s.rays, self.fov_deg, self.sector_deg);
        let (state, a) = distance_pid(&self.gains, &self.state, gap, self.dt);
        self.state = state;
        out[0] = a;
    }

    fn snapshot(&self) -> Vec<f64> {
        vec![self.state.integral, self.state.prev_error.unwrap_or(f64::NAN)]
    }
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("group `{group}`: output `{channel}` is not wired")]
    Unwired { group: String, channel: String },
    #[error("group `{group}`: `{source_ref}` does not name a controller output (expected `controller.output`)")]
    BadReference { group: String, source_ref: String },
    #[error("group `{group}`: unknown output channel `{channel}`")]
    UnknownChannel { group: String, channel: String },
    #[error("steering network expects {expected} inputs but the scan has {got} rays")]
    MlpInput { expected: usize, got: usize },
    #[error(transparent)]
    Mlp(#[from] MlpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SteeringKind {
    #[default]
    Geometric,
    Mlp,
}

/// Group wiring: system output channel → `controller.output`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    pub name: String,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BankConfig {
    pub steering: SteeringKind,
    /// Weights file for the steering network. Without one, a built-in
    /// clearance-balancing network is used.
    pub mlp_weights: Option<PathBuf>,
    pub mlp_hidden: usize,
    pub steer_gain: f64,
    /// Close-range repulsion of the geometric steering.
    pub steer_repel_range: f64,
    pub steer_repel_gain: f64,
    /// How hard the swerving heuristic turns away from a close obstacle.
    pub swerve_avoid_gain: f64,
    pub a_max: f64,
    pub r_max: f64,
    pub dt_stop_target: f64,
    pub pid: PidGains,
    pub groups: Vec<GroupConfig>,
}

impl Default for BankConfig {
    fn default() -> Self {
        let group = |name: &str, d: &str, a: &str| GroupConfig {
            name: name.into(),
            outputs: [("d".to_string(), d.to_string()), ("a".to_string(), a.to_string())].into(),
        };
        BankConfig {
            steering: SteeringKind::Geometric,
            mlp_weights: None,
            mlp_hidden: 256,
            steer_gain: GeometricSteering::default().gain,
            steer_repel_range: GeometricSteering::default().repel_range,
            steer_repel_gain: GeometricSteering::default().repel_gain,
            swerve_avoid_gain: SwerveHeuristic::default().avoid_gain,
            a_max: 2.0,
            r_max: 4.0,
            dt_stop_target: 0.1,
            pid: PidGains::default(),
            groups: vec![
                group("normal", "steer.d", "throttle.a"),
                group("cautious", "steer.d", "pid.a"),
                group("stopping", "swerve.d", "brake.a"),
            ],
        }
    }
}

/// Scan and timing parameters the controllers need from the plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantInfo {
    pub rays: usize,
    pub fov_deg: f64,
    pub max_range: f64,
    pub dt: f64,
}

struct Group {
    members: Vec<usize>,
    /// `(controller, output index)` per system output channel.
    wiring: Vec<(usize, usize)>,
}

pub struct ControllerBank {
    controllers: Vec<Box<dyn Controller>>,
    groups: Vec<Group>,
    group_names: Vec<String>,
    rays_channel: usize,
    speed_channel: usize,
    scratch: Vec<Vec<f64>>,
    active: Vec<bool>,
}

impl ControllerBank {
    /// Builds a bank from explicit controllers and wiring. `outputs` lists
    /// the system output channels in order.
    pub fn new(
        controllers: Vec<Box<dyn Controller>>,
        groups: &[GroupConfig],
        outputs: &[&str],
        rays_channel: usize,
        speed_channel: usize,
    ) -> Result<Self, BankError> {
        let mut built = Vec::new();
        for g in groups {
            if let Some(ch) = g.outputs.keys().find(|k| !outputs.contains(&k.as_str())) {
                return Err(BankError::UnknownChannel { group: g.name.clone(), channel: ch.clone() });
            }
            let mut wiring = Vec::new();
            let mut members = Vec::new();
            for ch in outputs {
                let src = g
                    .outputs
                    .get(*ch)
                    .ok_or_else(|| BankError::Unwired { group: g.name.clone(), channel: ch.to_string() })?;
                let bad = || BankError::BadReference { group: g.name.clone(), source_ref: src.clone() };
                let (cname, oname) = src.split_once('.').ok_or_else(bad)?;
                let ci = controllers.iter().position(|c| c.name() == cname).ok_or_else(bad)?;
                let oi = controllers[ci].output_names().iter().position(|o| *o == oname).ok_or_else(bad)?;
                wiring.push((ci, oi));
                if !members.contains(&ci) {
                    members.push(ci);
                }
            }
            built.push(Group { members, wiring });
        }
        Ok(ControllerBank {
            scratch: controllers.iter().map(|c| vec![0.0; c.output_names().len()]).collect(),
            active: vec![false; controllers.len()],
            controllers,
            groups: built,
            group_names: groups.iter().map(|g| g.name.clone()).collect(),
            rays_channel,
            speed_channel,
        })
    }

    /// The standard vehicle bank: steering, throttle, swerve, brake and PID,
    /// wired per `config.groups`. Inputs are `(R, v)`, outputs `(d, a)`.
    pub fn vehicle(config: &BankConfig, plant: &PlantInfo) -> Result<Self, BankError> {
        let steering = match config.steering {
            SteeringKind::Geometric => SteeringImpl::Geometric(GeometricSteering {
                gain: config.steer_gain,
                max_range: plant.max_range,
                repel_range: config.steer_repel_range,
                repel_gain: config.steer_repel_gain,
                ..GeometricSteering::default()
            }),
            SteeringKind::Mlp => {
                let model = match &config.mlp_weights {
                    Some(path) => MlpModel::load(path)?,
                    None => MlpModel::clearance_steering(plant.rays, config.mlp_hidden, config.steer_gain),
                };
                if model.input_dim() != plant.rays {
                    return Err(BankError::MlpInput { expected: model.input_dim(), got: plant.rays });
                }
                SteeringImpl::Mlp { model, max_range: plant.max_range, scratch: Vec::with_capacity(plant.rays) }
            }
        };
        let controllers: Vec<Box<dyn Controller>> = vec![
            Box::new(Steering { kind: steering }),
            Box::new(FullThrottle { a_max: config.a_max }),
            Box::new(Swerve(SwerveHeuristic {
                max_range: plant.max_range,
                fov_deg: plant.fov_deg,
                avoid_gain: config.swerve_avoid_gain,
                ..SwerveHeuristic::default()
            })),
            Box::new(LinearBrake { r_max: config.r_max, dt_stop_target: config.dt_stop_target, dt: plant.dt }),
            Box::new(DistancePid {
                gains: config.pid,
                state: PidState::default(),
                dt: plant.dt,
                fov_deg: plant.fov_deg,
                sector_deg: measures::FRONT_SECTOR_DEG,
            }),
        ];
        ControllerBank::new(controllers, &config.groups, &["d", "a"], 0, 1)
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    pub fn controller(&self, name: &str) -> Option<&dyn Controller> {
        self.controllers.iter().find(|c| c.name() == name).map(|c| &**c)
    }

    pub fn reset(&mut self) {
        self.controllers.iter_mut().for_each(|c| c.reset());
    }

    /// Snapshots of every controller's internal state, by name.
    pub fn snapshots(&self) -> Vec<(String, Vec<f64>)> {
        self.controllers.iter().map(|c| (c.name().to_string(), c.snapshot())).collect()
    }

    /// Which controllers stepped on the last `execute`.
    pub fn last_active(&self) -> &[bool] {
        &self.active
    }

    fn sensors<'a>(&self, input: &'a Valuation) -> Sensors<'a> {
        let rays = match input.get(self.rays_channel) {
            Some(Value::Array(a)) => &a[..],
            _ => &[],
        };
        let speed = input.get(self.speed_channel).and_then(Value::as_scalar).unwrap_or(0.0);
        Sensors { rays, speed }
    }

    /// Runs one named group regardless of any mask; for open-loop control.
    pub fn execute_group(&mut self, group: usize, input: &Valuation) -> Valuation {
        let mut mask = vec![false; self.groups.len()];
        mask[group] = true;
        self.execute(input, &mask)[group].take().expect("group was active")
    }
}

impl GroupBank for ControllerBank {
    fn execute(&mut self, input: &Valuation, mask: &[bool]) -> Vec<Option<Valuation>> {
        let sensors = self.sensors(input);
        self.active.iter_mut().for_each(|a| *a = false);
        for (g, &on) in self.groups.iter().zip(mask) {
            if on {
                g.members.iter().for_each(|&m| self.active[m] = true);
            }
        }
        for (i, c) in self.controllers.iter_mut().enumerate() {
            if self.active[i] {
                c.step(&sensors, &mut self.scratch[i]);
            }
        }
        self.groups
            .iter()
            .zip(mask)
            .map(|(g, &on)| {
                on.then(|| Valuation::new(g.wiring.iter().map(|&(c, o)| Value::Scalar(self.scratch[c][o])).collect()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plant() -> PlantInfo {
        PlantInfo { rays: 61, fov_deg: 230.0, max_range: 5.0, dt: 0.05 }
    }

    fn input(front: f64, v: f64) -> Valuation {
        let mut rays = vec![3.0; 61];
        rays[30] = front;
        Valuation::new(vec![rays.into(), v.into()])
    }

    #[test]
    fn brake_examples() {
        assert_eq!(brake_linear(0.0, 4.0, 0.3, 0.05), 0.0);
        assert_eq!(brake_linear(2.4, 4.0, 0.3, 0.05), -4.0);
        let eps = 1e-4;
        let a = brake_linear(eps, 4.0, 0.3, 0.05);
        assert!(a < 0.0 && (a * 0.05).abs() <= eps);
    }

    #[test]
    fn groups_produce_complete_outputs() {
        let mut bank = ControllerBank::vehicle(&BankConfig::default(), &plant()).unwrap();
        let out = bank.execute(&input(1.0, 2.0), &[true, true, true]);
        for y in &out {
            let y = y.as_ref().unwrap();
            assert_eq!(y.len(), 2);
            let d = y.get(0).unwrap().as_scalar().unwrap();
            let a = y.get(1).unwrap().as_scalar().unwrap();
            assert!((-1.0..=1.0).contains(&d) && (-4.0..=2.0).contains(&a));
        }
        assert_eq!(out[0].as_ref().unwrap().get(1).unwrap().as_scalar(), Some(2.0));
        assert_eq!(out[2].as_ref().unwrap().get(1).unwrap().as_scalar(), Some(-4.0));
    }

    #[test]
    fn suspended_pid_is_frozen() {
        let mut bank = ControllerBank::vehicle(&BankConfig::default(), &plant()).unwrap();
        bank.execute(&input(1.0, 1.0), &[false, true, false]);
        let before = bank.controller("pid").unwrap().snapshot();
        for _ in 0..50 {
            let out = bank.execute(&input(4.0, 1.0), &[true, false, true]);
            assert!(out[1].is_none());
        }
        let after = bank.controller("pid").unwrap().snapshot();
        assert_eq!(
            before.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            after.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(!bank.last_active()[4]);

        // Resuming gives the same output as if no ticks had been skipped.
        let mut fresh = ControllerBank::vehicle(&BankConfig::default(), &plant()).unwrap();
        fresh.execute(&input(1.0, 1.0), &[false, true, false]);
        let a = fresh.execute(&input(0.8, 1.0), &[false, true, false]);
        let b = bank.execute(&input(0.8, 1.0), &[false, true, false]);
        assert_eq!(a, b);
    }

    #[test]
    fn wiring_errors() {
        let plant = plant();
        let mut cfg = BankConfig::default();
        cfg.groups[0].outputs.remove("a");
        assert!(matches!(ControllerBank::vehicle(&cfg, &plant), Err(BankError::Unwired { .. })));
        let mut cfg = BankConfig::default();
        cfg.groups[0].outputs.insert("a".into(), "rocket.a".into());
        assert!(matches!(ControllerBank::vehicle(&cfg, &plant), Err(BankError::BadReference { .. })));
        let mut cfg = BankConfig::default();
        cfg.groups[0].outputs.insert("z".into(), "steer.d".into());
        assert!(matches!(ControllerBank::vehicle(&cfg, &plant), Err(BankError::UnknownChannel { .. })));
    }

    #[test]
    fn mlp_bank_steers_like_geometric() {
        let cfg = BankConfig { steering: SteeringKind::Mlp, mlp_hidden: 32, ..BankConfig::default() };
        let mut mlp = ControllerBank::vehicle(&cfg, &plant()).unwrap();
        let mut geo = ControllerBank::vehicle(&BankConfig::default(), &plant()).unwrap();
        let mut rays: Vec<f64> = (0..61).map(|i| 1.0 + i as f64 / 30.0).collect();
        rays[30] = 5.0;
        let x = Valuation::new(vec![rays.into(), 1.0.into()]);
        let d_mlp = mlp.execute_group(0, &x).get(0).unwrap().as_scalar().unwrap();
        let d_geo = geo.execute_group(0, &x).get(0).unwrap().as_scalar().unwrap();
        assert!(d_geo > 0.0);
        assert!((d_mlp - d_geo).abs() < 0.05 * d_geo, "{d_mlp} vs {d_geo}");
    }
}
