use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::{ray_circle, Vec2};
use super::track::TrackMap;
use crate::measures;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarConfig {
    pub fov_deg: f64,
    pub rays: usize,
    pub max_range: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig { fov_deg: measures::DEFAULT_FOV_DEG, rays: 61, max_range: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("lidar needs an odd ray count of at least 3, got {0}")]
pub struct LidarError(pub usize);

impl LidarConfig {
    pub fn validate(&self) -> Result<(), LidarError> {
        if self.rays < 3 || self.rays.is_multiple_of(2) {
            return Err(LidarError(self.rays));
        }
        Ok(())
    }
}

/// A disc obstacle: another car or a pedestrian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

/// Casts `cfg.rays` rays evenly across the field of view centered on
/// `heading`, writing the clamped hit distances into `out`.
pub fn raycast_into(map: &TrackMap, discs: &[Disc], pos: Vec2, heading: f64, cfg: &LidarConfig, out: &mut Vec<f64>) {
    out.clear();
    for i in 0..cfg.rays {
        let theta = heading + measures::ray_angle_deg(i, cfg.rays, cfg.fov_deg).to_radians();
        let dir = Vec2::from_angle(theta);
        let mut best = cfg.max_range;
        for w in &map.walls {
            if let Some(t) = w.ray_hit(pos, dir) {
                best = best.min(t);
            }
        }
        for d in discs {
            if let Some(t) = ray_circle(pos, dir, d.center, d.radius) {
                best = best.min(t);
            }
        }
        out.push(best);
    }
}

pub fn raycast(map: &TrackMap, discs: &[Disc], pos: Vec2, heading: f64, cfg: &LidarConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(cfg.rays);
    raycast_into(map, discs, pos, heading, cfg, &mut out);
    out
}
