//! Distance-keeping PID with integral clamp.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub target_gap: f64,
    /// Bound on `|∫e dt|`.
    pub windup: f64,
    /// Output bound.
    pub a_max: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        PidGains { kp: 1.5, ki: 0.3, kd: 0.0, target_gap: 1.5, windup: 2.0, a_max: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

/// One PID update. The derivative term is zero on the first step.
pub fn distance_pid(gains: &PidGains, state: &PidState, gap: f64, dt: f64) -> (PidState, f64) {
    let e = gap - gains.target_gap;
    let integral = (state.integral + e * dt).clamp(-gains.windup, gains.windup);
    let derivative = state.prev_error.map_or(0.0, |p| (e - p) / dt);
    let a = gains.kp * e + gains.ki * integral + gains.kd * derivative;
    (PidState { integral, prev_error: Some(e) }, a.clamp(-gains.a_max, gains.a_max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium() {
        let g = PidGains::default();
        let (s, a) = distance_pid(&g, &PidState::default(), g.target_gap, 0.05);
        assert_eq!(a, 0.0);
        assert_eq!(s.integral, 0.0);
    }

    #[test]
    fn constant_error_matches_closed_form() {
        let g = PidGains { a_max: 100.0, ..PidGains::default() };
        let (e, dt) = (-0.2, 0.05);
        let mut s = PidState::default();
        for k in 1..=400 {
            let (next, a) = distance_pid(&g, &s, g.target_gap + e, dt);
            s = next;
            let integral = (k as f64 * e * dt).max(-g.windup);
            let want = g.kp * e + g.ki * integral;
            assert!((a - want).abs() < 1e-9, "k={k}: {a} vs {want}");
        }
        assert_eq!(s.integral, -g.windup);
    }

    #[test]
    fn windup_is_clamped() {
        let g = PidGains::default();
        let mut s = PidState::default();
        for _ in 0..10_000 {
            s = distance_pid(&g, &s, 5.0, 0.05).0;
            assert!(s.integral.abs() <= g.windup);
        }
        assert_eq!(s.integral, g.windup);
        assert_eq!(distance_pid(&g, &s, 5.0, 0.05).1, g.a_max);
    }
}
