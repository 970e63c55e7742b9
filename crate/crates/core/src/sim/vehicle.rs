use serde::{Deserialize, Serialize};

use super::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleConfig {
    pub radius: f64,
    pub v_max: f64,
    /// Yaw rate per unit steering per unit speed (1/m).
    pub k_steer: f64,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        VehicleConfig { radius: 0.3, v_max: 2.4, k_steer: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub pos: Vec2,
    pub heading: f64,
    pub speed: f64,
    /// Last applied commands.
    pub d: f64,
    pub a: f64,
    pub spawn_tick: u64,
    pub crashed: bool,
}

impl VehicleState {
    pub fn at(pos: Vec2, heading: f64, spawn_tick: u64) -> Self {
        VehicleState { pos, heading, speed: 0.0, d: 0.0, a: 0.0, spawn_tick, crashed: false }
    }
}

/// Unicycle update: turn, change speed, then advance. A crashed car does
/// not move.
pub fn step_vehicle(state: &VehicleState, d: f64, a: f64, dt: f64, cfg: &VehicleConfig) -> VehicleState {
    if state.crashed {
        return VehicleState { speed: 0.0, ..*state };
    }
    let d = d.clamp(-1.0, 1.0);
    let heading = state.heading + cfg.k_steer * d * state.speed * dt;
    let speed = (state.speed + a * dt).clamp(0.0, cfg.v_max);
    let pos = state.pos + Vec2::from_angle(heading) * (speed * dt);
    VehicleState { pos, heading, speed, d, a, ..*state }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: VehicleConfig = VehicleConfig { radius: 0.3, v_max: 2.4, k_steer: 1.5 };

    #[test]
    fn straight_and_clamped() {
        let s = VehicleState { speed: 1.0, ..VehicleState::at(Vec2::default(), 0.0, 0) };
        let n = step_vehicle(&s, 0.0, 0.0, 0.05, &CFG);
        assert!((n.pos.x - 0.05).abs() < 1e-15 && n.pos.y == 0.0);
        let fast = VehicleState { speed: 2.4, ..s };
        assert_eq!(step_vehicle(&fast, 0.0, 2.0, 0.05, &CFG).speed, 2.4);
        assert_eq!(step_vehicle(&s, 0.0, -100.0, 0.05, &CFG).speed, 0.0);
    }

    #[test]
    fn constant_steering_traces_a_circle() {
        let (d, v, dt) = (-0.5, 2.0, 0.01);
        let mut s = VehicleState { speed: v, ..VehicleState::at(Vec2::default(), 0.0, 0) };
        let mut pts = Vec::new();
        for _ in 0..2000 {
            s = step_vehicle(&s, d, 0.0, dt, &CFG);
            pts.push(s.pos);
        }
        // Discrete chords of length v·dt turning by Δ per step lie on a
        // circle of radius v·dt / (2 sin(Δ/2)).
        let delta = CFG.k_steer * d.abs() * v * dt;
        let r = v * dt / (2.0 * (delta / 2.0).sin());
        assert!((r - 1.0 / (CFG.k_steer * d.abs())).abs() < 1e-3);
        // Fit the center from three points and check every point.
        let (p1, p2, p3) = (pts[0], pts[100], pts[200]);
        let center = circumcenter(p1, p2, p3);
        for p in &pts {
            assert!((p.dist(center) - r).abs() < 1e-9, "{}", p.dist(center));
        }
        // Negative steering turns left, i.e. toward negative y when heading +x.
        assert!(center.y < 0.0);
    }

    fn circumcenter(a: Vec2, b: Vec2, c: Vec2) -> Vec2 {
        let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
        let sq = |p: Vec2| p.dot(p);
        Vec2::new(
            (sq(a) * (b.y - c.y) + sq(b) * (c.y - a.y) + sq(c) * (a.y - b.y)) / d,
            (sq(a) * (c.x - b.x) + sq(b) * (a.x - c.x) + sq(c) * (b.x - a.x)) / d,
        )
    }
}
