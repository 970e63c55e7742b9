//! Scan-based steering. Negative steering turns left; ray 0 is the leftmost.

use crate::measures;

/// Sum of readings left and right of the center ray.
fn side_sums(rays: &[f64]) -> (f64, f64) {
    let center = rays.len() / 2;
    let left: f64 = rays[..center].iter().sum();
    let right: f64 = rays[center + 1..].iter().sum();
    (left, right)
}

/// Clearance-balancing steering, the stand-in for a trained network.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricSteering {
    pub gain: f64,
    pub max_range: f64,
    /// Steering applied when both sides are equally clear but the center ray
    /// is blocked.
    pub tie_break: f64,
    /// Readings closer than this push the car away from their side.
    pub repel_range: f64,
    pub repel_gain: f64,
}

impl Default for GeometricSteering {
    fn default() -> Self {
        GeometricSteering { gain: 2.0, max_range: 5.0, tie_break: 0.3, repel_range: 0.8, repel_gain: 4.0 }
    }
}

impl GeometricSteering {
    /// Normalised clearance difference in `[-1, 1]`, positive when the right
    /// side is clearer.
    pub fn clearance(&self, rays: &[f64]) -> f64 {
        let half = (rays.len() / 2).max(1) as f64;
        let (left, right) = side_sums(rays);
        (right - left) / (half * self.max_range)
    }

    /// Push away from close readings, positive when the close readings are
    /// on the left.
    pub fn repulsion(&self, rays: &[f64]) -> f64 {
        if self.repel_range <= 0.0 {
            return 0.0;
        }
        let center = rays.len() / 2;
        let closeness = |r: f64| ((self.repel_range - r) / self.repel_range).max(0.0);
        let left: f64 = rays[..center].iter().map(|&r| closeness(r)).sum();
        let right: f64 = rays[center + 1..].iter().map(|&r| closeness(r)).sum();
        self.repel_gain * (left - right) / center.max(1) as f64
    }

    pub fn steer(&self, rays: &[f64]) -> f64 {
        if rays.is_empty() {
            return 0.0;
        }
        let f = self.clearance(rays);
        let repel = self.repulsion(rays);
        let center = rays[rays.len() / 2];
        if f.abs() < 1e-12 && repel.abs() < 1e-12 && center < self.max_range {
            let (left, _) = side_sums(rays);
            let mean_side = left / (rays.len() / 2).max(1) as f64;
            if center < mean_side {
                return -self.tie_break.abs().min(1.0);
            }
        }
        (self.gain * f + repel).tanh()
    }
}

/// Swerving heuristic: centering plus a push away from the nearest reading
/// in the front sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SwerveHeuristic {
    pub centering_gain: f64,
    pub avoid_gain: f64,
    /// Readings beyond this distance do not cause swerving.
    pub avoid_range: f64,
    /// At or below this distance the swerve saturates at full lock.
    pub full_lock_distance: f64,
    pub max_range: f64,
    pub fov_deg: f64,
    pub sector_deg: f64,
}

impl Default for SwerveHeuristic {
    fn default() -> Self {
        SwerveHeuristic {
            centering_gain: 2.0,
            avoid_gain: 0.3,
            avoid_range: 2.0,
            full_lock_distance: 0.4,
            max_range: 5.0,
            fov_deg: measures::DEFAULT_FOV_DEG,
            sector_deg: measures::FRONT_SECTOR_DEG,
        }
    }
}

impl SwerveHeuristic {
    pub fn steer(&self, rays: &[f64]) -> f64 {
        if rays.is_empty() {
            return 0.0;
        }
        let n = rays.len();
        let center = n / 2;
        let half = (center).max(1) as f64;
        let (left, right) = side_sums(rays);
        let centering = self.centering_gain * (right - left) / (half * self.max_range);

        let sector = measures::front_sector(n, self.fov_deg, self.sector_deg);
        let (k, nearest) = sector
            .clone()
            .map(|i| (i, rays[i]))
            .fold((center, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        let mut avoid = 0.0;
        if nearest < self.avoid_range && self.avoid_gain > 0.0 {
            // Away from the obstacle: an obstacle on the left pushes right.
            let away = match k.cmp(&center) {
                std::cmp::Ordering::Less => 1.0,
                std::cmp::Ordering::Greater => -1.0,
                std::cmp::Ordering::Equal => {
                    // Dead ahead: go round the clearer side of the sector.
                    let l: f64 = rays[sector.start..center].iter().sum();
                    let r: f64 = rays[center + 1..sector.end].iter().sum();
                    if r > l {
                        1.0
                    } else if l > r {
                        -1.0
                    } else {
                        0.0
                    }
                }
            };
            if nearest <= self.full_lock_distance {
                return away;
            }
            let closeness = (self.avoid_range - nearest) / (self.avoid_range - self.full_lock_distance);
            avoid = away * self.avoid_gain * closeness;
        }
        (centering + avoid).clamp(-1.0, 1.0)
    }
}
